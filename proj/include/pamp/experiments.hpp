#pragma once

// Computational kernels behind the built-in experiments. Each one returns plain
// structs; the harness turns them into tables and the acceptance suite checks
// them directly.

#include "amp_run.hpp"
#include "lasso.hpp"
#include "state_evolution.hpp"
#include "sure_tuner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace pamp {

/// n equally spaced points on [lo, hi].
inline std::vector<double> linear_grid(double lo, double hi, int n) {
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
  return g;
}

/// Excess Bayes risk of gamma over the optimal gamma at noise level sigma.
struct ThresholdQuality {
  double gamma = 0.0;
  double gamma_opt = 0.0;
  double risk = 0.0;
  double risk_opt = 0.0;
  double excess = 0.0;
  bool success = false;  // excess < rel_tol * max(risk_opt, floor)
};

inline ThresholdQuality threshold_quality(const SignalPrior& prior, double sigma, double gamma,
                                          double rel_tol = 0.05, double floor = 1e-3) {
  ThresholdQuality q;
  q.gamma = gamma;
  if (!(sigma > 0.0)) {  // nothing left to estimate; any threshold is optimal
    q.success = true;
    return q;
  }
  const double tau_opt = optimal_threshold(prior, sigma);
  q.gamma_opt = tau_opt / sigma;
  q.risk_opt = scalar_risk(prior, sigma, tau_opt);
  q.risk = scalar_risk(prior, sigma, gamma * sigma);
  q.excess = q.risk - q.risk_opt;
  q.success = q.excess < rel_tol * std::max(q.risk_opt, floor);
  return q;
}

// ---- SURE accuracy along an AMP trajectory ----

struct RiskCurveSample {
  int iteration = 0;  // AMP iteration whose threshold the curve would choose
  double sigma_hat = 0.0;
  std::vector<double> gammas;
  std::vector<double> sure;
  std::vector<double> bayes;  // R_B(sigma_hat, gamma sigma_hat) under the instance prior
  double sup_deviation = 0.0;
};

/// Runs AMP with the oracle threshold (the Bayes-risk minimizer at sigma_hat)
/// and samples the SURE curve and the Bayes-risk curve before each listed iteration.
inline std::vector<RiskCurveSample> risk_curves(const ProblemInstance& inst, std::vector<int> iterations,
                                                const std::vector<double>& gammas) {
  std::sort(iterations.begin(), iterations.end());
  const SignalPrior prior = inst.config.effective_prior();
  std::vector<RiskCurveSample> out;
  AmpState s = amp_init(inst);
  const int last = iterations.empty() ? 0 : iterations.back();
  for (int t = 1; t <= last; ++t) {
    if (std::find(iterations.begin(), iterations.end(), t) != iterations.end()) {
      RiskCurveSample c;
      c.iteration = t;
      c.sigma_hat = s.sigma_hat;
      c.gammas = gammas;
      for (double g : gammas) {
        const double tau = g * s.sigma_hat;
        c.sure.push_back(s.sigma_hat > 0.0 ? sure_risk(s.pseudo_data, s.sigma_hat, tau) : 0.0);
        c.bayes.push_back(s.sigma_hat > 0.0 ? scalar_risk(prior, s.sigma_hat, tau) : 0.0);
        c.sup_deviation = std::max(c.sup_deviation, std::abs(c.sure.back() - c.bayes.back()));
      }
      out.push_back(std::move(c));
    }
    if (s.terminal()) break;
    s = amp_step(s, inst, optimal_threshold(prior, s.sigma_hat));
  }
  return out;
}

// ---- bisection quality along a tuned run ----

struct BisectionSnapshot {
  int iteration = 0;
  double sigma_hat = 0.0;
  double delta_star = 0.0;
  ThresholdQuality quality;
  RiskCurve curve;  // SURE samples when requested
};

inline std::vector<BisectionSnapshot> bisection_snapshots(const ProblemInstance& inst,
                                                          std::vector<int> iterations,
                                                          TunerConfig tuner = {}, int curve_points = 0) {
  std::sort(iterations.begin(), iterations.end());
  const SignalPrior prior = inst.config.effective_prior();
  std::vector<BisectionSnapshot> out;
  AmpState s = amp_init(inst);
  const int last = iterations.empty() ? 0 : iterations.back();
  for (int t = 1; t <= last; ++t) {
    const bool wanted = std::find(iterations.begin(), iterations.end(), t) != iterations.end();
    const double sigma = s.sigma_hat;
    auto [next, diag] = tune_and_step(s, inst, tuner, nullptr, wanted ? curve_points : 0);
    if (wanted) {
      BisectionSnapshot b;
      b.iteration = t;
      b.sigma_hat = sigma;
      b.delta_star = diag.delta_star;
      b.quality = threshold_quality(prior, sigma, diag.gamma_hat);
      b.curve = std::move(diag.curve);
      out.push_back(std::move(b));
    }
    s = std::move(next);
  }
  return out;
}

// ---- fixed-Delta bisection on the first iteration ----

struct DeltaTrial {
  double delta = 0.0;
  ThresholdQuality quality;
  double sure_at_gamma = 0.0;
};

/// First-iteration bisection for every Delta, on pseudo-data X^T y built without
/// storing X, so p in the tens of thousands fits in memory.
inline std::vector<DeltaTrial> delta_sweep(const GenConfig& gen, const std::vector<double>& deltas,
                                           const TunerConfig& tuner = {}) {
  const FirstIterate fi = first_iterate_streamed(gen);
  const SignalPrior prior = gen.effective_prior();
  std::vector<DeltaTrial> out;
  for (double d : deltas) {
    DeltaTrial trial;
    trial.delta = d;
    const double g = modified_bisection(fi.pseudo_data, fi.sigma_hat, d, tuner);
    trial.quality = threshold_quality(prior, fi.sigma_hat, g);
    trial.sure_at_gamma = sure_risk(fi.pseudo_data, fi.sigma_hat, g * fi.sigma_hat, tuner.h);
    out.push_back(trial);
  }
  return out;
}

// ---- three tuning strategies side by side ----

struct MseComparison {
  double maximin_chi = 0.0;
  double constant_tau = 0.0;
  std::vector<double> mse_sure;      // index t = iteration, entry 0 is the start
  std::vector<double> mse_maximin;
  std::vector<double> mse_constant;
  std::vector<double> tuner_cost;    // tuner work per iteration in matvec units
};

/// SURE-tuned AMP, AMP at tau = chi_maximin * sigma_hat, and AMP at the constant
/// tau from `tau_grid` with the lowest MSE after `iters` iterations.
inline MseComparison mse_compare(const ProblemInstance& inst, int iters, double chi_maximin,
                                 const std::vector<double>& tau_grid) {
  MseComparison out;
  out.maximin_chi = chi_maximin;
  auto mses = [](const AmpRunResult& r) {
    std::vector<double> v;
    for (const auto& rec : r.records) v.push_back(rec.mse);
    return v;
  };
  // per-iteration tuner cost from the operation counter, one tuned step at a time
  {
    TunerConfig tuner;
    OpCounter ops;
    AmpState s = amp_init(inst, &ops);
    out.mse_sure.push_back(mean_sq_diff(s.beta, inst.beta_o));
    const double matvec = static_cast<double>(inst.n()) * inst.p();
    for (int t = 0; t < iters; ++t) {
      const double before = ops.tuner_elements;
      if (s.terminal()) {
        out.mse_sure.push_back(out.mse_sure.back());
        out.tuner_cost.push_back(0.0);
        continue;
      }
      auto [next, diag] = tune_and_step(s, inst, tuner, &ops);
      s = std::move(next);
      out.mse_sure.push_back(mean_sq_diff(s.beta, inst.beta_o));
      out.tuner_cost.push_back((ops.tuner_elements - before) / matvec);
    }
  }
  AmpRunConfig mm{.max_iters = iters, .threshold_source = PolicyFromSe{FixedChi{chi_maximin}}};
  out.mse_maximin = mses(amp_run(inst, mm));
  double best = std::numeric_limits<double>::infinity();
  for (double tau : tau_grid) {
    AmpRunConfig c{.max_iters = iters,
                   .threshold_source = PolicyFromSe{ExplicitSequence{std::vector<double>(iters, tau)}}};
    auto m = mses(amp_run(inst, c));
    if (m.back() < best) {
      best = m.back();
      out.constant_tau = tau;
      out.mse_constant = std::move(m);
    }
  }
  auto pad = [&](std::vector<double>& v) {
    while (static_cast<int>(v.size()) < iters + 1) v.push_back(v.back());
  };
  pad(out.mse_sure);
  pad(out.mse_maximin);
  pad(out.mse_constant);
  return out;
}

/// First iteration t >= 1 with mse[t] <= target, or -1.
inline int first_iteration_reaching(const std::vector<double>& mse, double target) {
  for (std::size_t t = 1; t < mse.size(); ++t)
    if (mse[t] <= target) return static_cast<int>(t);
  return -1;
}

// ---- greedy versus joint threshold choice in state evolution ----

struct JointSearch {
  double greedy_sigma = 0.0;  // sigma^T along the greedy trace
  double joint_sigma = 0.0;   // best sigma^T over the grid of threshold sequences
  std::vector<double> greedy_taus;
  std::vector<double> joint_taus;
  long long evaluated = 0;
};

/// Exhaustive search over grid^T threshold sequences of length T.
inline JointSearch greedy_vs_joint(const SeConfig& base, int T, const std::vector<double>& tau_grid) {
  if (T < 1) throw InvalidConfig("T must be >= 1");
  if (tau_grid.empty()) throw InvalidConfig("tau grid is empty");
  JointSearch out;
  const auto greedy = greedy_optimal_taus(base, T);
  out.greedy_sigma = greedy.sigmas.at(T);
  out.greedy_taus = greedy.taus;
  out.joint_sigma = std::numeric_limits<double>::infinity();
  const double sigma0 = se_initial_sigma(base);
  std::vector<std::size_t> idx(T, 0);
  const std::size_t m = tau_grid.size();
  while (true) {
    double s = sigma0;
    for (int t = 0; t < T; ++t) s = se_step(s, tau_grid[idx[t]], base);
    ++out.evaluated;
    if (s < out.joint_sigma) {
      out.joint_sigma = s;
      out.joint_taus.clear();
      for (int t = 0; t < T; ++t) out.joint_taus.push_back(tau_grid[idx[t]]);
    }
    int k = T - 1;
    while (k >= 0 && ++idx[k] == m) idx[k--] = 0;
    if (k < 0) break;
  }
  return out;
}

}  // namespace pamp
