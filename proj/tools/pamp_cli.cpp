// pamp_cli: generate instances, run AMP / state evolution / LASSO paths and the
// built-in experiments. Tables go to stdout unless --out is given.
//
// exit codes: 0 ok, 1 invalid config or arguments, 2 numerical failure, 3 I/O

#include "pamp/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

using namespace pamp;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::string out;
  std::string format = "csv";
};

// problem description shared by the verbs that need an instance
struct GenOpts {
  std::string config_file;
  std::string instance_file;
  std::optional<int> p;
  std::optional<double> delta, rho, sigma_w, atom;

  void add(CLI::App* cmd, bool allow_instance) {
    cmd->add_option("--config", config_file, "GenConfig JSON file");
    if (allow_instance) cmd->add_option("--instance", instance_file, "instance file written by `gen`");
    cmd->add_option("--p", p, "number of unknowns");
    cmd->add_option("--delta", delta, "undersampling ratio n/p");
    cmd->add_option("--rho", rho, "sparsity ratio k/n");
    cmd->add_option("--sigma-w", sigma_w, "noise standard deviation");
    cmd->add_option("--atom", atom, "value of the nonzero entries (point-mass prior)");
  }

  GenConfig config(const Globals& g) const {
    GenConfig c = config_file.empty() ? gen_config_from_json(json::object(), false)
                                      : gen_config_from_json(read_json_file(config_file), false);
    if (config_file.empty()) {
      c.p = 2000;
      c.delta = 0.85;
      c.rho = 0.25;
      c.sigma_w = 0.2;
    }
    if (p) c.p = *p;
    if (delta) c.delta = *delta;
    if (rho) c.rho = *rho;
    if (sigma_w) c.sigma_w = *sigma_w;
    if (atom) c.prior = SignalPrior::point_mass(*atom, 1.0);
    if (g.seed) c.seed = *g.seed;
    c.validate();
    return c;
  }

  ProblemInstance instance(const Globals& g) const {
    if (!instance_file.empty()) {
      if (!config_file.empty() || p || delta || rho || sigma_w || atom || g.seed)
        throw InvalidConfig("--instance cannot be combined with problem options or --seed");
      return load_instance(instance_file);
    }
    return generate(config(g));
  }
};

OutputFormat parse_format(const std::string& f) {
  if (f == "csv") return OutputFormat::Csv;
  if (f == "json") return OutputFormat::Json;
  throw InvalidConfig("--format: expected csv or json");
}

std::string render(const Table& t, OutputFormat f) {
  return f == OutputFormat::Csv ? to_csv(t) : to_json(t).dump(1) + "\n";
}

void emit(const Table& t, const Globals& g, const std::string& path) {
  const std::string text = render(t, parse_format(g.format));
  if (path.empty())
    std::cout << text;
  else
    write_text_file(path, text);
}

std::string ext(const Globals& g) { return parse_format(g.format) == OutputFormat::Csv ? ".csv" : ".json"; }

std::string join(const std::string& dir, const std::string& file) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
  return (std::filesystem::path(dir) / file).string();
}

int run_experiment_verb(const std::string& target, const Globals& g, std::optional<int> replicates) {
  ExperimentSpec spec;
  if (auto preset = find_preset(target)) {
    spec = *preset;
  } else if (std::filesystem::exists(target)) {
    const json j = read_json_file(target);
    spec = j.contains("spec") && j.contains("replicate_seeds") ? spec_from_manifest(j) : experiment_from_json(j);
  } else {
    throw InvalidConfig("'" + target + "' is neither a preset name nor a file (see list-presets)");
  }
  if (g.seed) spec.gen.seed = *g.seed;
  if (!g.out.empty()) spec.output_path = g.out;
  if (replicates) spec.replicates = *replicates;

  const auto res = run_experiment(spec, {g.threads, parse_format(g.format)});
  for (const auto& [r, msg] : res.failures) std::cerr << "replicate " << r << " failed: " << msg << "\n";
  if (res.all_failed(spec.replicates)) std::rethrow_exception(res.first_error);
  for (const auto& f : res.files) std::cout << (std::filesystem::path(spec.output_path) / f).string() << "\n";
  std::cout << (std::filesystem::path(spec.output_path) / "manifest.json").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parameterless approximate message passing: instances, runs, state evolution and experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "root seed (instance seed, or experiment root seed)");
  app.add_option("--threads", g.threads, "worker threads for experiment replicates")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "output file (directory for tune-demo and experiment)");
  app.add_option("--format", g.format, "table format")->check(CLI::IsMember({"csv", "json"}));

  // gen
  auto* gen = app.add_subcommand("gen", "generate a problem instance");
  GenOpts gen_opts;
  gen_opts.add(gen, false);
  bool gen_arrays = false;
  gen->add_flag("--arrays", gen_arrays, "store X, beta_o, w, y instead of only the config");

  // amp
  auto* amp = app.add_subcommand("amp", "run AMP and print its trajectory");
  GenOpts amp_opts;
  amp_opts.add(amp, true);
  std::string amp_run_file;
  std::optional<int> amp_iters;
  std::optional<double> amp_chi;
  amp->add_option("--run", amp_run_file, "AmpRunConfig JSON file");
  amp->add_option("--iters", amp_iters, "maximum iterations");
  amp->add_option("--chi", amp_chi, "use tau = chi * sigma_hat instead of the SURE tuner");

  // se
  auto* se = app.add_subcommand("se", "state-evolution trace");
  std::string se_file;
  double se_delta = 0.85, se_rho = 0.25, se_sigma = 0.2, se_atom = 1.0;
  int se_T = 20;
  std::optional<double> se_chi;
  bool se_fixed = false;
  se->add_option("--config", se_file, "JSON with prior, delta, sigma_w, policy, T");
  se->add_option("--delta", se_delta, "undersampling ratio");
  se->add_option("--rho", se_rho, "sparsity ratio");
  se->add_option("--sigma-w", se_sigma, "noise standard deviation");
  se->add_option("--atom", se_atom, "nonzero value of the point-mass prior");
  se->add_option("--T", se_T, "iterations")->check(CLI::PositiveNumber);
  se->add_option("--chi", se_chi, "FixedChi policy (default: optimal greedy)");
  se->add_flag("--fixed-point", se_fixed, "print the LASSO calibration at the fixed point of --chi");

  // lasso-path
  auto* lp = app.add_subcommand("lasso-path", "LASSO solutions along a decreasing lambda grid");
  GenOpts lp_opts;
  lp_opts.add(lp, true);
  int lp_points = 100;
  std::string lp_top = "4x_se_optimal";
  lp->add_option("--points", lp_points, "grid size")->check(CLI::PositiveNumber);
  lp->add_option("--lambda-top", lp_top, "largest lambda: a number, 4x_se_optimal or lambda_max");

  // tune-demo
  auto* td = app.add_subcommand("tune-demo", "SURE-tuned AMP with per-iteration tuning diagnostics");
  GenOpts td_opts;
  td_opts.add(td, true);
  int td_iters = 10, td_points = 50;
  td->add_option("--iters", td_iters, "iterations")->check(CLI::PositiveNumber);
  td->add_option("--curve-points", td_points, "SURE samples per iteration")->check(CLI::NonNegativeNumber);

  // experiment
  auto* ex = app.add_subcommand("experiment", "run a preset or an experiment/manifest JSON file");
  std::string ex_target;
  std::optional<int> ex_reps;
  ex->add_option("target", ex_target, "preset name or file")->required();
  ex->add_option("--replicates", ex_reps, "override the replicate count")->check(CLI::PositiveNumber);

  auto* lsp = app.add_subcommand("list-presets", "list built-in experiments");
  bool lsp_json = false;
  lsp->add_flag("--json", lsp_json, "print full specs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    parse_format(g.format);
    if (*gen) {
      const GenConfig c = gen_opts.config(g);
      const std::string path = g.out.empty() ? "instance.pamp" : g.out;
      save_instance(path, generate(c), gen_arrays);
      json info = {{"file", path}, {"n", c.n()}, {"p", c.p}, {"k", c.k()}, {"config", to_json(c)}};
      std::cout << info.dump(2) << "\n";
    } else if (*amp) {
      const auto inst = amp_opts.instance(g);
      AmpRunConfig rc = amp_run_file.empty() ? AmpRunConfig{} : amp_run_config_from_json(read_json_file(amp_run_file));
      if (amp_run_file.empty()) rc.max_iters = 50;
      if (amp_iters) rc.max_iters = *amp_iters;
      if (amp_chi) rc.threshold_source = PolicyFromSe{FixedChi{*amp_chi}};
      emit(trajectory_table(amp_run(inst, rc)), g, g.out);
    } else if (*se) {
      SeConfig c;
      int T = se_T;
      if (!se_file.empty()) {
        const json j = read_json_file(se_file);
        detail::check_keys(j, {"prior", "delta", "sigma_w", "policy", "T"}, "se");
        c.prior = j.contains("prior") ? prior_from_json(j.at("prior")) : SignalPrior::point_mass(1.0, 0.2125);
        detail::read_opt(j, "delta", c.delta, "se");
        detail::read_opt(j, "sigma_w", c.sigma_w, "se");
        detail::read_opt(j, "T", T, "se");
        c.policy = j.contains("policy") ? policy_from_json(j.at("policy")) : ThresholdPolicy{OptimalGreedy{}};
      } else {
        c.prior = SignalPrior::point_mass(se_atom, se_rho * se_delta);
        c.delta = se_delta;
        c.sigma_w = se_sigma;
        c.policy = OptimalGreedy{};
      }
      if (se_chi) c.policy = FixedChi{*se_chi};
      c.validate();
      if (se_fixed) {
        const double chi = se_chi ? *se_chi : optimal_fixed_chi(c.prior, c.delta, c.sigma_w).chi;
        LambdaPath one;
        one.points.push_back(se_fixed_point(chi, c.prior, c.delta, c.sigma_w));
        emit(lambda_path_table(one), g, g.out);
      } else {
        const auto tr = se_trace(c, T);
        Table t;
        t.columns = {"t", "sigma", "tau"};
        for (std::size_t i = 0; i < tr.sigmas.size(); ++i)
          t.add("se", {double(i), tr.sigmas[i], i < tr.taus.size() ? tr.taus[i] : std::nan("")});
        emit(t, g, g.out);
      }
    } else if (*lp) {
      const auto inst = lp_opts.instance(g);
      json top;
      try {
        top = std::stod(lp_top);
      } catch (const std::exception&) {
        top = lp_top;
      }
      const double hi = detail::lambda_top(top, inst.config, inst);
      std::vector<double> grid;
      for (int i = lp_points; i >= 1; --i) grid.push_back(hi * i / lp_points);
      emit(lasso_path_table(lasso_path(inst, grid)), g, g.out);
    } else if (*td) {
      const auto inst = td_opts.instance(g);
      AmpRunConfig rc{.max_iters = td_iters, .threshold_source = SureTuned{}, .curve_points = td_points};
      const auto res = amp_run(inst, rc);
      if (g.out.empty()) {
        emit(diagnostics_table(res), g, "");
      } else {
        emit(trajectory_table(res), g, join(g.out, "trajectory" + ext(g)));
        emit(diagnostics_table(res), g, join(g.out, "diagnostics" + ext(g)));
        emit(sure_curve_table(res), g, join(g.out, "sure_curves" + ext(g)));
      }
    } else if (*ex) {
      return run_experiment_verb(ex_target, g, ex_reps);
    } else if (*lsp) {
      for (const auto& s : builtin_experiments()) {
        if (lsp_json)
          std::cout << to_json(s).dump() << "\n";
        else
          std::printf("%-30s %-20s p=%-6d delta=%-5g rho=%-5g sigma_w=%-8.4g replicates=%d\n", s.name.c_str(),
                      s.kind.c_str(), s.gen.p, s.gen.delta, s.gen.rho, s.gen.sigma_w, s.replicates);
      }
    }
  } catch (const InvalidConfig& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return 1;
  } catch (const json::exception& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return 1;
  } catch (const NonConvergence& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 3;
  } catch (const std::bad_alloc&) {
    std::cerr << "numerical failure: out of memory\n";
    return 2;
  }
  return 0;
}
