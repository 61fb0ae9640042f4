#include "pamp/harness.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <set>

using namespace pamp;
namespace fs = std::filesystem;

namespace {

std::string tmpdir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "pamp_test_harness" / name;
  fs::remove_all(dir);
  return dir.string();
}

// small and quick variants of the presets
ExperimentSpec quick(const std::string& preset, json params, int reps, const std::string& out) {
  auto s = *find_preset(preset);
  s.params = std::move(params);
  s.replicates = reps;
  s.output_path = tmpdir(out);
  return s;
}

std::string slurp(const std::string& dir, const std::string& file) {
  return read_text_file((fs::path(dir) / file).string());
}

}  // namespace

TEST(Presets, NamesUniqueAndKindsKnown) {
  std::set<std::string> names;
  for (const auto& s : builtin_experiments()) {
    EXPECT_TRUE(names.insert(s.name).second) << s.name;
    EXPECT_NO_THROW(s.validate());
    EXPECT_NO_THROW(normalized_params(s.kind, s.params));
  }
  for (const auto* n : {"risk-vs-p-case1", "risk-vs-p-case2", "risk-vs-p-case3", "bisection-snapshots-noiseless",
                        "bisection-snapshots-noisy", "delta-sensitivity", "mse-compare", "lasso-path-fig2",
                        "lasso-path-fig3-low", "lasso-path-fig3-high", "se-lambda-path", "greedy-vs-joint"})
    EXPECT_TRUE(names.count(n)) << n;
}

TEST(Presets, PaperParameters) {
  const auto c2 = find_preset("risk-vs-p-case2")->gen;
  EXPECT_EQ(c2.delta, 0.85);
  EXPECT_EQ(c2.rho, 0.25);
  EXPECT_EQ(c2.sigma_w, 0.5);
  const auto c3 = find_preset("risk-vs-p-case3")->gen;
  EXPECT_EQ(c3.delta, 0.2);
  EXPECT_EQ(c3.rho, 0.1);
  EXPECT_EQ(c3.sigma_w, 0.1);
  const auto c1 = find_preset("risk-vs-p-case1")->gen;
  EXPECT_EQ(c1.sigma_w, 0.0);
  EXPECT_EQ(normalized_params("risk_vs_p", json::object())["p_values"], json({200, 600, 4000, 10000}));
  const auto f2 = find_preset("lasso-path-fig2")->gen;
  EXPECT_EQ(f2.p, 2000);
  EXPECT_EQ(f2.n(), 1000);
  EXPECT_EQ(f2.k(), 100);
  EXPECT_NEAR(f2.sigma_w * f2.sigma_w * 1000, 0.7, 1e-12);  // N(0,1) design noise rescaled by 1/sqrt(n)
}

TEST(Presets, SerializationIdentity) {
  for (const auto& s : builtin_experiments()) {
    const auto back = experiment_from_json(json::parse(to_json(s).dump()));
    EXPECT_EQ(back, s) << s.name;
    EXPECT_EQ(to_json(back).dump(), to_json(s).dump());
  }
}

TEST(Spec, Validation) {
  auto s = *find_preset("greedy-vs-joint");
  s.replicates = 0;
  EXPECT_THROW(s.validate(), InvalidConfig);
  s = *find_preset("greedy-vs-joint");
  s.name = "bad name";
  EXPECT_THROW(s.validate(), InvalidConfig);
  EXPECT_THROW(experiment_from_json(json{{"name", "x"}, {"kind", "nope"}}), InvalidConfig);
  EXPECT_THROW(experiment_from_json(json{{"name", "x"}, {"kind", "mse_compare"}, {"params", {{"iters", 3}}}}),
               InvalidConfig);
  EXPECT_THROW(experiment_from_json(json{{"name", "x"}, {"kind", "mse_compare"}, {"extra", 1}}), InvalidConfig);
}

TEST(Run, RiskVsPOneCurveFilePerP) {
  auto s = quick("risk-vs-p-case1", {{"p_values", {100, 200}}, {"gamma_points", 5}}, 2, "riskvp");
  const auto res = run_experiment(s);
  EXPECT_TRUE(res.failures.empty());
  std::set<std::string> files(res.files.begin(), res.files.end());
  EXPECT_TRUE(files.count("risk-vs-p-case1_p100.csv"));
  EXPECT_TRUE(files.count("risk-vs-p-case1_p200.csv"));
  EXPECT_TRUE(files.count("risk-vs-p-case1_sup.csv"));
  EXPECT_TRUE(fs::exists(fs::path(s.output_path) / "manifest.json"));
  // per-replicate rows and tagged summaries
  const auto& sup = res.tables.at("risk-vs-p-case1_sup");
  int reps = 0, med = 0;
  for (const auto& r : sup.rows) {
    reps += r.tag == "replicate";
    med += r.tag == "median";
  }
  EXPECT_EQ(reps, 2 * 2 * 2);  // replicates x p values x iterations
  EXPECT_EQ(med, 2 * 2);
}

TEST(Run, MseCompareThreeColumns) {
  auto s = quick("mse-compare", {{"iterations", 5}, {"tau_grid_points", 4}}, 1, "msecmp");
  s.gen.p = 300;
  const auto res = run_experiment(s);
  const auto& cols = res.tables.at("mse-compare").columns;
  for (const auto* c : {"mse_sure", "mse_maximin", "mse_grid_constant"})
    EXPECT_NE(std::find(cols.begin(), cols.end(), c), cols.end()) << c;
}

TEST(Run, ByteIdenticalAcrossRunsAndThreads) {
  auto a = quick("mse-compare", {{"iterations", 4}, {"tau_grid_points", 3}}, 3, "det_a");
  a.gen.p = 300;
  auto b = a;
  b.output_path = tmpdir("det_b");
  const auto ra = run_experiment(a, {.threads = 1});
  const auto rb = run_experiment(b, {.threads = 3});
  ASSERT_EQ(ra.files, rb.files);
  for (const auto& f : ra.files) EXPECT_EQ(slurp(a.output_path, f), slurp(b.output_path, f)) << f;
  auto strip = [](json m) {
    for (const auto* k : {"started_at", "wall_time_seconds", "threads"}) m.erase(k);
    m["spec"].erase("output_path");
    return m;
  };
  EXPECT_EQ(strip(ra.manifest), strip(rb.manifest));
}

TEST(Run, ReplicateSeedsIsolated) {
  // replicate r sees the same data whatever the replicate count or preset
  auto two = quick("mse-compare", {{"iterations", 3}, {"tau_grid_points", 2}}, 2, "iso2");
  two.gen.p = 200;
  auto one = two;
  one.replicates = 1;
  one.output_path = tmpdir("iso1");
  const auto r2 = run_experiment(two), r1 = run_experiment(one);
  const auto& t1 = r1.tables.at("mse-compare").rows;
  const auto& t2 = r2.tables.at("mse-compare").rows;
  for (std::size_t i = 0; i < t1.size(); ++i) EXPECT_EQ(t1[i].values, t2[i].values);
  EXPECT_NE(replicate_seed(1, 0), replicate_seed(1, 1));
  EXPECT_NE(replicate_seed(1, 0), replicate_seed(2, 0));
  EXPECT_EQ(r2.manifest["replicate_seeds"][0], replicate_seed(two.gen.seed, 0));
}

TEST(Run, ManifestReproducesOutputs) {
  auto s = quick("lasso-path-fig3-low", {{"lambda_points", 6}}, 1, "manifest_a");
  s.gen.p = 300;
  run_experiment(s);
  const json manifest = read_json_file((fs::path(s.output_path) / "manifest.json").string());
  auto again = spec_from_manifest(manifest);
  EXPECT_EQ(again, s);
  again.output_path = tmpdir("manifest_b");
  const auto res = run_experiment(again);
  for (const auto& f : manifest["files"]) {
    const std::string name = f.get<std::string>();
    EXPECT_EQ(slurp(s.output_path, name), slurp(again.output_path, name)) << name;
  }
  EXPECT_EQ(manifest["config_hash"].get<std::string>().size(), 16u);
  EXPECT_EQ(manifest["version"], kVersion);
}

TEST(Run, FailedReplicateRecordedRunContinues) {
  auto s = quick("delta-sensitivity", {{"p_values", {300}}, {"deltas", {0.1, 1.0}}}, 2, "fail");
  s.gen.delta = 0.5;
  s.gen.rho = 0.1;
  auto bad = s;
  bad.params = {{"p_values", {1}}, {"deltas", {0.1}}};  // n = floor(0.5 * 1) = 0, rejected inside the replicate
  bad.output_path = tmpdir("fail_bad");
  const auto res = run_experiment(bad);
  EXPECT_EQ(res.failures.size(), 2u);
  EXPECT_TRUE(res.all_failed(2));
  EXPECT_TRUE(res.first_error);
  EXPECT_EQ(res.manifest["failures"].size(), 2u);
  const auto ok = run_experiment(s);
  EXPECT_TRUE(ok.failures.empty());
}

TEST(Run, JsonFormat) {
  auto s = quick("greedy-vs-joint", {{"grid_points", 4}}, 1, "jsonfmt");
  const auto res = run_experiment(s, {.format = OutputFormat::Json});
  for (const auto& f : res.files) {
    EXPECT_EQ(fs::path(f).extension(), ".json");
    EXPECT_NO_THROW(read_json_file((fs::path(s.output_path) / f).string()));
  }
}

TEST(Run, UnwritableOutputIsIoError) {
  auto s = quick("greedy-vs-joint", {{"grid_points", 3}}, 1, "unused");
  s.output_path = "/proc/pamp-cannot-write";
  EXPECT_THROW(run_experiment(s), IoError);
}

TEST(Quantile, Interpolates) {
  EXPECT_EQ(quantile({3, 1, 2}, 0.5), 2.0);
  EXPECT_EQ(quantile({1, 2, 3, 4}, 0.5), 2.5);
  EXPECT_TRUE(std::isnan(quantile({}, 0.5)));
}
