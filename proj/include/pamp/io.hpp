#pragma once

// Serialization: JSON for configurations, a raw binary container for full
// problem instances, and CSV for result tables.
//
// JSON objects are read strictly: unknown keys are rejected so a typo in a
// config file fails loudly instead of silently falling back to a default.
// Missing keys take the defaults of the C++ structs.

#include "amp_run.hpp"
#include "lasso.hpp"
#include "problem.hpp"
#include "state_evolution.hpp"
#include "sure_tuner.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

namespace pamp {

using json = nlohmann::json;

/// File-system failures, always carrying the offending path.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* what) {
  if (!j.is_object()) throw InvalidConfig(std::string(what) + ": expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw InvalidConfig(std::string(what) + ": unknown key '" + key + "'");
  }
}

template <class T>
void read_opt(const json& j, const char* key, T& out, const char* what) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InvalidConfig(std::string(what) + "." + key + ": " + e.what());
  }
}

}  // namespace detail

// ---- SignalPrior ----

inline json to_json(const SignalPrior& prior) {
  json atoms = json::array();
  for (const auto& a : prior.atoms) atoms.push_back({{"value", a.value}, {"probability", a.probability}});
  return {{"atoms", atoms}};
}

inline SignalPrior prior_from_json(const json& j) {
  detail::check_keys(j, {"atoms"}, "prior");
  SignalPrior prior;
  if (!j.contains("atoms")) return prior;
  if (!j.at("atoms").is_array()) throw InvalidConfig("prior.atoms: expected an array");
  for (const auto& a : j.at("atoms")) {
    detail::check_keys(a, {"value", "probability"}, "prior.atoms[]");
    Atom atom;
    detail::read_opt(a, "value", atom.value, "prior.atoms[]");
    detail::read_opt(a, "probability", atom.probability, "prior.atoms[]");
    prior.atoms.push_back(atom);
  }
  prior.validate();
  return prior;
}

// ---- GenConfig ----

inline json to_json(const GenConfig& c) {
  return {{"p", c.p},         {"delta", c.delta},     {"rho", c.rho},
          {"prior", to_json(c.prior)}, {"sigma_w", c.sigma_w}, {"seed", c.seed}};
}

inline GenConfig gen_config_from_json(const json& j, bool validate = true) {
  detail::check_keys(j, {"p", "delta", "rho", "prior", "sigma_w", "seed"}, "gen");
  GenConfig c;
  c.prior = SignalPrior::point_mass(1.0, 1.0);
  detail::read_opt(j, "p", c.p, "gen");
  detail::read_opt(j, "delta", c.delta, "gen");
  detail::read_opt(j, "rho", c.rho, "gen");
  detail::read_opt(j, "sigma_w", c.sigma_w, "gen");
  detail::read_opt(j, "seed", c.seed, "gen");
  if (j.contains("prior")) c.prior = prior_from_json(j.at("prior"));
  if (validate) c.validate();
  return c;
}

// ---- TunerConfig ----

inline json to_json(const TunerConfig& t) {
  json j = {{"h", t.h.h},
            {"bisection_iters", t.bisection_iters},
            {"epsilon", t.epsilon},
            {"delta_grid", t.delta_grid}};
  if (t.delta_star) j["delta_star"] = *t.delta_star;
  return j;
}

inline TunerConfig tuner_from_json(const json& j) {
  detail::check_keys(j, {"h", "bisection_iters", "epsilon", "delta_grid", "delta_star"}, "tuner");
  TunerConfig t;
  detail::read_opt(j, "h", t.h.h, "tuner");
  detail::read_opt(j, "bisection_iters", t.bisection_iters, "tuner");
  detail::read_opt(j, "epsilon", t.epsilon, "tuner");
  detail::read_opt(j, "delta_grid", t.delta_grid, "tuner");
  if (j.contains("delta_star") && !j.at("delta_star").is_null()) {
    double d = 0.0;
    detail::read_opt(j, "delta_star", d, "tuner");
    t.delta_star = d;
  }
  t.validate();
  return t;
}

// ---- ThresholdPolicy ----

inline json to_json(const ThresholdPolicy& policy) {
  if (const auto* f = std::get_if<FixedChi>(&policy)) return {{"type", "fixed_chi"}, {"chi", f->chi}};
  if (std::holds_alternative<OptimalGreedy>(policy)) return {{"type", "optimal_greedy"}};
  return {{"type", "explicit"}, {"taus", std::get<ExplicitSequence>(policy).taus}};
}

inline ThresholdPolicy policy_from_json(const json& j) {
  detail::check_keys(j, {"type", "chi", "taus"}, "policy");
  std::string type = "fixed_chi";
  detail::read_opt(j, "type", type, "policy");
  ThresholdPolicy policy;
  if (type == "fixed_chi") {
    FixedChi f;
    detail::read_opt(j, "chi", f.chi, "policy");
    policy = f;
  } else if (type == "optimal_greedy") {
    policy = OptimalGreedy{};
  } else if (type == "explicit") {
    ExplicitSequence e;
    detail::read_opt(j, "taus", e.taus, "policy");
    policy = e;
  } else {
    throw InvalidConfig("policy.type: expected fixed_chi, optimal_greedy or explicit, got '" + type + "'");
  }
  validate_policy(policy);
  return policy;
}

// ---- AmpRunConfig ----

inline json to_json(const AmpRunConfig& c) {
  json j = {{"max_iters", c.max_iters}, {"keep_states", c.keep_states}, {"curve_points", c.curve_points}};
  if (const auto* s = std::get_if<SureTuned>(&c.threshold_source))
    j["threshold"] = {{"source", "sure"}, {"tuner", to_json(s->tuner)}};
  else
    j["threshold"] = {{"source", "policy"},
                      {"policy", to_json(std::get<PolicyFromSe>(c.threshold_source).policy)}};
  if (c.mse_tolerance) j["mse_tolerance"] = *c.mse_tolerance;
  if (c.sigma_rel_tolerance) j["sigma_rel_tolerance"] = *c.sigma_rel_tolerance;
  return j;
}

inline AmpRunConfig amp_run_config_from_json(const json& j) {
  detail::check_keys(j, {"max_iters", "keep_states", "curve_points", "threshold", "mse_tolerance",
                         "sigma_rel_tolerance"},
                     "run");
  AmpRunConfig c;
  detail::read_opt(j, "max_iters", c.max_iters, "run");
  detail::read_opt(j, "keep_states", c.keep_states, "run");
  detail::read_opt(j, "curve_points", c.curve_points, "run");
  if (j.contains("mse_tolerance")) {
    double v = 0.0;
    detail::read_opt(j, "mse_tolerance", v, "run");
    c.mse_tolerance = v;
  }
  if (j.contains("sigma_rel_tolerance")) {
    double v = 0.0;
    detail::read_opt(j, "sigma_rel_tolerance", v, "run");
    c.sigma_rel_tolerance = v;
  }
  if (j.contains("threshold")) {
    const json& t = j.at("threshold");
    detail::check_keys(t, {"source", "tuner", "policy"}, "run.threshold");
    std::string source = "sure";
    detail::read_opt(t, "source", source, "run.threshold");
    if (source == "sure")
      c.threshold_source = SureTuned{t.contains("tuner") ? tuner_from_json(t.at("tuner")) : TunerConfig{}};
    else if (source == "policy")
      c.threshold_source =
          PolicyFromSe{t.contains("policy") ? policy_from_json(t.at("policy")) : ThresholdPolicy{}};
    else
      throw InvalidConfig("run.threshold.source: expected sure or policy, got '" + source + "'");
  }
  c.validate();
  return c;
}

// ---- files ----

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read error on '" + path + "'");
  return s;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("write error on '" + path + "'");
}

inline json read_json_file(const std::string& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidConfig("'" + path + "': " + e.what());
  }
}

// ---- instances ----
//
// Binary container, little-endian:
//   "PAMPINST" | u32 version | u32 flags (bit 0: arrays present)
//   u64 config length | config JSON (UTF-8)
//   if arrays: i64 n | i64 p | beta_o[p] | X[n*p] column-major | w[n] | y[n]   (float64)
// Without arrays the instance is regenerated from the config on load.

inline constexpr char kInstanceMagic[8] = {'P', 'A', 'M', 'P', 'I', 'N', 'S', 'T'};
inline constexpr std::uint32_t kInstanceVersion = 1;

namespace detail {

template <class T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::ifstream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("'" + path + "': truncated instance file");
  return v;
}
inline void put_doubles(std::ofstream& out, const double* d, std::size_t n) {
  out.write(reinterpret_cast<const char*>(d), static_cast<std::streamsize>(n * sizeof(double)));
}
inline void get_doubles(std::ifstream& in, double* d, std::size_t n, const std::string& path) {
  in.read(reinterpret_cast<char*>(d), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw IoError("'" + path + "': truncated instance file");
}

}  // namespace detail

inline void save_instance(const std::string& path, const ProblemInstance& inst, bool with_arrays) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  const std::string cfg = to_json(inst.config).dump();
  out.write(kInstanceMagic, 8);
  detail::put<std::uint32_t>(out, kInstanceVersion);
  detail::put<std::uint32_t>(out, with_arrays ? 1u : 0u);
  detail::put<std::uint64_t>(out, cfg.size());
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  if (with_arrays) {
    detail::put<std::int64_t>(out, inst.n());
    detail::put<std::int64_t>(out, inst.p());
    detail::put_doubles(out, inst.beta_o.data(), inst.beta_o.size());
    detail::put_doubles(out, inst.X.data(), inst.X.size());
    detail::put_doubles(out, inst.w.data(), inst.w.size());
    detail::put_doubles(out, inst.y.data(), inst.y.size());
  }
  out.flush();
  if (!out) throw IoError("write error on '" + path + "'");
}

inline ProblemInstance load_instance(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kInstanceMagic, 8) != 0) throw IoError("'" + path + "': not an instance file");
  if (detail::get<std::uint32_t>(in, path) != kInstanceVersion)
    throw IoError("'" + path + "': unsupported instance file version");
  const auto flags = detail::get<std::uint32_t>(in, path);
  const auto len = detail::get<std::uint64_t>(in, path);
  std::string cfg(len, '\0');
  in.read(cfg.data(), static_cast<std::streamsize>(len));
  if (!in) throw IoError("'" + path + "': truncated instance file");
  json cfg_json;
  try {
    cfg_json = json::parse(cfg);
  } catch (const json::parse_error&) {
    throw IoError("'" + path + "': corrupt config block");
  }
  const GenConfig config = gen_config_from_json(cfg_json);
  if (!(flags & 1u)) return generate(config);

  ProblemInstance inst;
  inst.config = config;
  const auto n = detail::get<std::int64_t>(in, path);
  const auto p = detail::get<std::int64_t>(in, path);
  if (n != config.n() || p != config.p) throw IoError("'" + path + "': array sizes disagree with config");
  inst.beta_o.resize(p);
  inst.X.resize(n, p);
  inst.w.resize(n);
  inst.y.resize(n);
  detail::get_doubles(in, inst.beta_o.data(), inst.beta_o.size(), path);
  detail::get_doubles(in, inst.X.data(), inst.X.size(), path);
  detail::get_doubles(in, inst.w.data(), inst.w.size(), path);
  detail::get_doubles(in, inst.y.data(), inst.y.size(), path);
  return inst;
}

// ---- tables ----

/// Column-named numeric table with a leading string column. Values print with
/// 17 significant digits so a CSV round-trips every double exactly.
struct Table {
  std::vector<std::string> columns;  // after the tag column
  std::string tag_column = "kind";
  struct Row {
    std::string tag;
    std::vector<double> values;
  };
  std::vector<Row> rows;

  void add(std::string tag, std::vector<double> values) {
    if (values.size() != columns.size()) throw std::logic_error("table row has wrong width");
    rows.push_back({std::move(tag), std::move(values)});
  }
};

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == std::floor(v) && std::abs(v) < 1e15) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.0f", v);
    return buf;
  }
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string to_csv(const Table& t, bool with_tag = true) {
  std::string s;
  if (with_tag) s += t.tag_column;
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    if (with_tag || i > 0) s += ',';
    s += t.columns[i];
  }
  s += '\n';
  for (const auto& r : t.rows) {
    if (with_tag) s += r.tag;
    for (std::size_t i = 0; i < r.values.size(); ++i) {
      if (with_tag || i > 0) s += ',';
      s += format_number(r.values[i]);
    }
    s += '\n';
  }
  return s;
}

inline json to_json(const Table& t) {
  json rows = json::array();
  for (const auto& r : t.rows) {
    json row = {{t.tag_column, r.tag}};
    for (std::size_t i = 0; i < t.columns.size(); ++i) row[t.columns[i]] = r.values[i];
    rows.push_back(std::move(row));
  }
  return {{"columns", t.columns}, {"rows", rows}};
}

// ---- standard tables ----

inline Table trajectory_table(const AmpRunResult& res) {
  Table t;
  t.columns = {"t", "tau", "gamma", "sigma_hat", "active_count", "mse", "delta_star"};
  for (const auto& r : res.records)
    t.add("iter", {double(r.t), r.tau, r.gamma, r.sigma_hat, double(r.active_count), r.mse, r.delta_star});
  return t;
}

inline Table diagnostics_table(const AmpRunResult& res) {
  Table t;
  t.columns = {"iteration", "gamma_hat", "tau", "delta_star", "risk_at_gamma_hat", "sigma_used"};
  for (const auto& d : res.diagnostics)
    t.add("tune", {double(d.iteration), d.gamma_hat, d.tau, d.delta_star, d.risk_at_gamma_hat, d.sigma_used});
  return t;
}

/// Verbose dump of the sampled risk curves carried by the diagnostics.
inline Table sure_curve_table(const AmpRunResult& res) {
  Table t;
  t.columns = {"iteration", "gamma", "sure"};
  for (const auto& d : res.diagnostics)
    for (std::size_t i = 0; i < d.curve.gammas.size(); ++i)
      t.add("curve", {double(d.iteration), d.curve.gammas[i], d.curve.estimates[i]});
  return t;
}

inline Table lambda_path_table(const LambdaPath& path) {
  Table t;
  t.columns = {"chi", "lambda", "sigma_hat", "mse", "active_fraction"};
  for (const auto& c : path.points) t.add("se", {c.chi, c.lambda, c.sigma_hat, c.mse, c.active_fraction});
  return t;
}

inline Table lasso_path_table(const std::vector<LassoPathPoint>& rows) {
  Table t;
  t.columns = {"lambda", "l0_fraction", "mse", "kkt_gap", "iterations"};
  for (const auto& r : rows) t.add("lasso", {r.lambda, r.l0_fraction, r.mse, r.kkt_gap, double(r.iterations)});
  return t;
}

}  // namespace pamp
