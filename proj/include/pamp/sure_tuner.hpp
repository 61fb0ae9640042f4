#pragma once

// Data-driven threshold tuning for AMP.
//
// The risk of thresholding the pseudo-data u = beta^t + X^T z^t is estimated by
// Stein's unbiased risk estimate
//   R(tau) = (1/p) ||eta(u; tau) - u||^2 + sigma^2 + (2 sigma^2 / p) sum_i (eta'(u_i; tau) - 1)
// and minimized over gamma = tau / sigma with a bisection on finite differences
// of R: the step Delta is picked once on the first AMP iteration from a grid of
// candidates and reused afterwards.

#include "amp.hpp"
#include "shrinkage.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace pamp {

/// {1e-5, 5e-5, 1e-4, 5e-4, ..., 1, 5, 10}
inline std::vector<double> default_delta_grid() {
  std::vector<double> g;
  for (int e = -5; e <= 1; ++e) {
    g.push_back(std::pow(10.0, e));
    if (e < 1) g.push_back(5.0 * std::pow(10.0, e));
  }
  return g;
}

struct TunerConfig {
  SmoothingBandwidth h{};
  int bisection_iters = 15;
  double epsilon = 0.0;
  std::vector<double> delta_grid = default_delta_grid();
  std::optional<double> delta_star;  // set after the first tuned iteration

  void validate() const {
    if (bisection_iters < 1) throw InvalidConfig("bisection_iters must be >= 1");
    if (!(epsilon >= 0.0)) throw InvalidConfig("epsilon must be >= 0");
    if (!(h.h >= 0.0)) throw InvalidConfig("smoothing bandwidth must be >= 0");
    if (delta_grid.empty()) throw InvalidConfig("delta_grid is empty");
    for (std::size_t i = 0; i < delta_grid.size(); ++i) {
      if (!(delta_grid[i] > 0.0)) throw InvalidConfig("delta_grid values must be positive");
      if (i > 0 && !(delta_grid[i] > delta_grid[i - 1]))
        throw InvalidConfig("delta_grid must be strictly increasing");
    }
    if (delta_star && !(*delta_star > 0.0)) throw InvalidConfig("delta_star must be positive");
  }

  friend bool operator==(const TunerConfig&, const TunerConfig&) = default;
};

struct RiskCurve {
  std::vector<double> gammas;
  std::vector<double> estimates;
  double sigma_used = 0.0;
};

/// SURE of eta_h(.; tau) on `u` at noise level sigma. O(p), no matrix products.
inline double sure_risk(std::span<const double> u, double sigma, double tau,
                        SmoothingBandwidth h = {}) {
  const auto p = static_cast<double>(u.size());
  double fit = 0.0, div = 0.0;
  if (h.h <= 0.0) {
    std::size_t dead = 0;
    for (double x : u) {
      const double a = std::abs(x);
      if (a > tau) {
        fit += tau * tau;
      } else {
        fit += x * x;
        ++dead;
      }
    }
    div = -static_cast<double>(dead);
  } else {
    for (double x : u) {
      const double e = smoothed_soft_threshold(x, tau, h) - x;
      fit += e * e;
      div += smoothed_soft_threshold_deriv(x, tau, h) - 1.0;
    }
  }
  const double s2 = sigma * sigma;
  return fit / p + s2 + 2.0 * s2 * div / p;
}

inline double sure_risk(const Vector& u, double sigma, double tau, SmoothingBandwidth h = {}) {
  return sure_risk(std::span<const double>(u.data(), static_cast<std::size_t>(u.size())), sigma,
                   tau, h);
}

/// Risk estimate as a function of gamma with memoized evaluations.
class SureObjective {
 public:
  SureObjective(std::span<const double> u, double sigma, SmoothingBandwidth h, OpCounter* ops)
      : u_(u), sigma_(sigma), h_(h), ops_(ops) {}

  double operator()(double gamma) {
    if (auto it = cache_.find(gamma); it != cache_.end()) return it->second;
    if (ops_) ops_->tuner_elements += static_cast<double>(u_.size());
    ++evaluations_;
    const double r = sure_risk(u_, sigma_, gamma * sigma_, h_);
    cache_.emplace(gamma, r);
    return r;
  }

  double gamma_upper() {
    if (ops_) ops_->tuner_elements += static_cast<double>(u_.size());
    double m = 0.0;
    for (double x : u_) m = std::max(m, std::abs(x));
    return sigma_ > 0.0 ? m / sigma_ : 0.0;
  }

  double sigma() const { return sigma_; }
  int evaluations() const { return evaluations_; }

 private:
  std::span<const double> u_;
  double sigma_;
  SmoothingBandwidth h_;
  OpCounter* ops_;
  std::map<double, double> cache_;
  int evaluations_ = 0;
};

/// One step of the search, for inspecting the bracket.
struct BisectionStep {
  double lower, upper, gamma, diff;
};

/// Modified bisection on any risk-of-gamma callback:
///   gamma = (lower + upper) / 2, Diff = (R(gamma + delta) - R(gamma)) / delta,
///   Diff > eps -> upper = gamma; Diff < -eps -> lower = gamma; otherwise stop.
/// Returns the last gamma visited (0 when upper == 0).
template <class Risk>
double modified_bisection_on(Risk&& risk, double upper, double delta, int iters, double eps,
                             std::vector<BisectionStep>* steps = nullptr) {
  double lower = 0.0;
  if (!(upper > 0.0)) return 0.0;
  double gamma = 0.0;
  for (int i = 0; i < iters; ++i) {
    gamma = 0.5 * (lower + upper);
    const double diff = (risk(gamma + delta) - risk(gamma)) / delta;
    if (steps) steps->push_back({lower, upper, gamma, diff});
    if (diff > eps)
      upper = gamma;
    else if (diff < -eps)
      lower = gamma;
    else
      break;
  }
  return gamma;
}

/// gamma-hat for pseudo-data `u` with upper end max|u_i| / sigma.
inline double modified_bisection(std::span<const double> u, double sigma, double delta,
                                 const TunerConfig& config, OpCounter* ops = nullptr) {
  SureObjective obj(u, sigma, config.h, ops);
  return modified_bisection_on(obj, obj.gamma_upper(), delta, config.bisection_iters,
                               config.epsilon);
}

inline double modified_bisection(const Vector& u, double sigma, double delta,
                                 const TunerConfig& config, OpCounter* ops = nullptr) {
  return modified_bisection(std::span<const double>(u.data(), static_cast<std::size_t>(u.size())),
                            sigma, delta, config, ops);
}

struct DeltaCandidate {
  double delta;
  double gamma;
  double risk;
};

struct DeltaSelection {
  double delta_star = 0.0;
  double gamma = 0.0;
  double risk = 0.0;
  std::vector<DeltaCandidate> candidates;
};

/// Runs the bisection once per Delta in the grid and keeps the Delta whose gamma
/// has the smallest estimated risk; ties go to the smaller Delta.
inline DeltaSelection select_delta_star(std::span<const double> u, double sigma,
                                        const TunerConfig& config, OpCounter* ops = nullptr) {
  config.validate();
  SureObjective obj(u, sigma, config.h, ops);
  const double upper = obj.gamma_upper();
  DeltaSelection sel;
  bool first = true;
  for (double d : config.delta_grid) {
    const double g = modified_bisection_on(obj, upper, d, config.bisection_iters, config.epsilon);
    const double r = obj(g);
    sel.candidates.push_back({d, g, r});
    if (first || r < sel.risk) {
      sel.delta_star = d;
      sel.gamma = g;
      sel.risk = r;
      first = false;
    }
  }
  return sel;
}

inline DeltaSelection select_delta_star(const Vector& u, double sigma, const TunerConfig& config,
                                        OpCounter* ops = nullptr) {
  return select_delta_star(std::span<const double>(u.data(), static_cast<std::size_t>(u.size())),
                           sigma, config, ops);
}

struct TuneDiagnostics {
  int iteration = 0;  // AMP iteration produced by this step
  double gamma_hat = 0.0;
  double tau = 0.0;
  double delta_star = 0.0;
  double risk_at_gamma_hat = 0.0;
  double sigma_used = 0.0;
  RiskCurve curve;  // filled only when curve_points > 0
};

/// Chooses tau = gamma-hat * sigma_hat from the state's pseudo-data and takes one
/// AMP step. The first call picks and locks config.delta_star.
inline std::pair<AmpState, TuneDiagnostics> tune_and_step(const AmpState& state,
                                                          const ProblemInstance& inst,
                                                          TunerConfig& config,
                                                          OpCounter* ops = nullptr,
                                                          int curve_points = 0) {
  TuneDiagnostics diag;
  diag.iteration = state.t + 1;
  diag.sigma_used = state.sigma_hat;
  const std::span<const double> u(state.pseudo_data.data(),
                                  static_cast<std::size_t>(state.pseudo_data.size()));
  if (state.sigma_hat > 0.0) {
    if (!config.delta_star) {
      const auto sel = select_delta_star(u, state.sigma_hat, config, ops);
      config.delta_star = sel.delta_star;
      diag.gamma_hat = sel.gamma;
    } else {
      diag.gamma_hat = modified_bisection(u, state.sigma_hat, *config.delta_star, config, ops);
    }
    diag.delta_star = *config.delta_star;
    diag.risk_at_gamma_hat = sure_risk(u, state.sigma_hat, diag.gamma_hat * state.sigma_hat, config.h);
    if (ops) ops->tuner_elements += static_cast<double>(u.size());
    if (curve_points > 0) {
      SureObjective obj(u, state.sigma_hat, config.h, nullptr);
      const double upper = obj.gamma_upper();
      diag.curve.sigma_used = state.sigma_hat;
      for (int i = 0; i < curve_points; ++i) {
        const double g = upper * i / std::max(1, curve_points - 1);
        diag.curve.gammas.push_back(g);
        diag.curve.estimates.push_back(obj(g));
      }
    }
  }
  diag.tau = diag.gamma_hat * state.sigma_hat;
  return {amp_step(state, inst, diag.tau, ops), std::move(diag)};
}

}  // namespace pamp
