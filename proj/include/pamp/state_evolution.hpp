#pragma once

// State evolution: the scalar recursion
//   sigma_{t+1}^2 = sigma_w^2 + (1/delta) E(eta(B + sigma_t W; tau_t) - B)^2
// that tracks the effective noise of AMP, its fixed points under the fixed
// false-alarm policy tau = chi * sigma, the chi <-> lambda calibration to the
// LASSO, and the greedy per-iteration optimal thresholds.

#include "prior.hpp"
#include "shrinkage.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace pamp {

struct FixedChi {
  double chi = 1.0;
  friend bool operator==(const FixedChi&, const FixedChi&) = default;
};
struct OptimalGreedy {
  friend bool operator==(const OptimalGreedy&, const OptimalGreedy&) = default;
};
struct ExplicitSequence {
  std::vector<double> taus;
  friend bool operator==(const ExplicitSequence&, const ExplicitSequence&) = default;
};

using ThresholdPolicy = std::variant<FixedChi, OptimalGreedy, ExplicitSequence>;

inline void validate_policy(const ThresholdPolicy& policy) {
  if (const auto* f = std::get_if<FixedChi>(&policy); f && !(f->chi >= 0.0))
    throw InvalidConfig("chi must be >= 0");
  if (const auto* e = std::get_if<ExplicitSequence>(&policy)) {
    if (e->taus.empty()) throw InvalidConfig("explicit threshold sequence is empty");
    for (double t : e->taus)
      if (!(t >= 0.0)) throw InvalidConfig("explicit thresholds must be >= 0");
  }
}

struct SeConfig {
  SignalPrior prior;
  double delta = 1.0;
  double sigma_w = 0.0;
  ThresholdPolicy policy = FixedChi{};

  void validate() const {
    if (!(delta > 0.0)) throw InvalidConfig("delta must be positive");
    if (!(sigma_w >= 0.0)) throw InvalidConfig("sigma_w must be >= 0");
    prior.validate();
    validate_policy(policy);
  }
};

struct SeTrace {
  std::vector<double> sigmas;  // sigma^0, sigma^1, ...
  std::vector<double> taus;    // tau^t used to produce sigma^{t+1}
  bool converged = false;
  double fixed_point_sigma = 0.0;
};

struct LambdaCalibration {
  double chi = 0.0;
  double sigma_hat = 0.0;
  double lambda = 0.0;
  double mse = 0.0;
  double active_fraction = 0.0;
  int iterations = 0;
};

/// sigma^0: the recursion applied once to the all-zero estimate,
/// sigma_w^2 + E[B^2] / delta. Equals E[B^2]/delta for noiseless data.
inline double se_initial_sigma(const SignalPrior& prior, double delta, double sigma_w) {
  return std::sqrt(sigma_w * sigma_w + prior.second_moment() / delta);
}

inline double se_initial_sigma(const SeConfig& c) { return se_initial_sigma(c.prior, c.delta, c.sigma_w); }

/// One step of the recursion. sigma > 0.
inline double se_step(double sigma, double tau, const SeConfig& c) {
  return std::sqrt(c.sigma_w * c.sigma_w + scalar_risk(c.prior, sigma, tau) / c.delta);
}

/// Psi(s) = sigma_w^2 + (1/delta) E(eta(B + sqrt(s) W; chi sqrt(s)) - B)^2, s = sigma^2.
inline double se_psi(double s, double chi, const SignalPrior& prior, double delta, double sigma_w) {
  if (s <= 0.0) return sigma_w * sigma_w;
  const double sigma = std::sqrt(s);
  return sigma_w * sigma_w + scalar_risk(prior, sigma, chi * sigma) / delta;
}

/// Threshold chosen by `policy` at iteration t for effective noise sigma.
inline double policy_threshold(const ThresholdPolicy& policy, const SignalPrior& prior,
                               double sigma, std::size_t t) {
  return std::visit(
      [&](const auto& p) -> double {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, FixedChi>) {
          return p.chi * sigma;
        } else if constexpr (std::is_same_v<P, OptimalGreedy>) {
          return sigma > 0.0 ? optimal_threshold(prior, sigma) : 0.0;
        } else {
          return p.taus[std::min(t, p.taus.size() - 1)];
        }
      },
      policy);
}

/// Runs T steps of the recursion from `sigma0` (default: se_initial_sigma).
/// `converged` is set once |sigma_{t+1}^2 - sigma_t^2| < tol.
inline SeTrace se_trace(const SeConfig& c, int T, std::optional<double> sigma0 = std::nullopt,
                        double tol = 1e-12) {
  c.validate();
  SeTrace tr;
  double sigma = sigma0.value_or(se_initial_sigma(c));
  tr.sigmas.push_back(sigma);
  for (int t = 0; t < T; ++t) {
    const double tau = policy_threshold(c.policy, c.prior, sigma, static_cast<std::size_t>(t));
    const double next = sigma > 0.0 ? se_step(sigma, tau, c) : c.sigma_w;
    tr.taus.push_back(tau);
    tr.sigmas.push_back(next);
    if (std::abs(next * next - sigma * sigma) < tol) {
      tr.converged = true;
      tr.fixed_point_sigma = next;
    }
    sigma = next;
  }
  if (!tr.converged) tr.fixed_point_sigma = sigma;
  return tr;
}

/// Greedy thresholds tau^t = argmin_tau R_B(sigma^t, tau) for t < T.
inline SeTrace greedy_optimal_taus(SeConfig c, int T) {
  if (T < 1) throw InvalidConfig("T must be >= 1");
  c.policy = OptimalGreedy{};
  return se_trace(c, T);
}

/// Limit of the greedy recursion: iterates until |d sigma^2| < tol.
inline SeTrace greedy_fixed_point(SeConfig c, double tol = 1e-15, int max_iters = 100000) {
  c.policy = OptimalGreedy{};
  c.validate();
  SeTrace tr;
  double sigma = se_initial_sigma(c);
  tr.sigmas.push_back(sigma);
  for (int t = 0; t < max_iters; ++t) {
    if (sigma <= 0.0) {
      tr.converged = true;
      break;
    }
    const double tau = optimal_threshold(c.prior, sigma);
    const double next = se_step(sigma, tau, c);
    tr.taus.push_back(tau);
    tr.sigmas.push_back(next);
    const double diff = std::abs(next * next - sigma * sigma);
    sigma = next;
    if (diff < tol) {
      tr.converged = true;
      break;
    }
  }
  tr.fixed_point_sigma = sigma;
  if (!tr.converged) throw NonConvergence("greedy state evolution did not settle");
  return tr;
}

namespace detail {

// Largest s at which g(s) = Psi(s) - s is still positive, then bisection.
// g is concave with g(sigma_w^2) >= 0, so a sign change brackets the unique
// positive root when sigma_w > 0.
inline double bracket_fixed_point(double chi, const SignalPrior& prior, double delta,
                                  double sigma_w, double start) {
  auto g = [&](double s) { return se_psi(s, chi, prior, delta, sigma_w) - s; };
  double hi = std::max(start, 1e-300);
  while (g(hi) >= 0.0) {
    hi *= 2.0;
    if (hi > 1e30) throw NonConvergence("state evolution has no finite fixed point (chi too small)");
  }
  double lo = sigma_w * sigma_w;
  if (lo <= 0.0) {
    lo = hi;
    while (g(lo) <= 0.0) {
      lo *= 0.5;
      if (lo < 1e-300) return 0.0;
    }
  }
  for (int i = 0; i < 400 && hi - lo > 1e-15 * std::max(1.0, hi); ++i) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Solves sigma^2 = Psi(sigma^2) for the fixed false-alarm policy and
/// calibrates lambda = chi sigma (1 - (1/delta) P(|B + sigma W| > chi sigma)).
///
/// Damped iteration (alpha = 1, halved once oscillation shows up) to
/// |d sigma^2| < tol or max_iters; if that stalls, a bracketing solve on the
/// concave map finishes the job. Throws NonConvergence when no finite fixed
/// point exists (e.g. chi = 0 with delta < 1).
inline LambdaCalibration se_fixed_point(double chi, const SignalPrior& prior, double delta,
                                        double sigma_w, double tol = 1e-12, int max_iters = 10000) {
  if (!(chi >= 0.0)) throw InvalidConfig("chi must be >= 0");
  const double s0 = sigma_w * sigma_w + prior.second_moment() / delta;
  double s = s0;
  double alpha = 1.0;
  int last_sign = 0, flips = 0;
  bool done = false;
  int it = 0;
  for (; it < max_iters; ++it) {
    const double psi = se_psi(s, chi, prior, delta, sigma_w);
    const double step = psi - s;
    const int sg = step > 0.0 ? 1 : (step < 0.0 ? -1 : 0);
    if (last_sign != 0 && sg != 0 && sg != last_sign && ++flips >= 2) alpha = 0.5;
    last_sign = sg;
    const double next = s + alpha * step;
    if (!std::isfinite(next) || next > 1e12 * std::max(1.0, s0)) break;
    if (std::abs(next - s) < tol) {
      s = next;
      done = true;
      break;
    }
    s = next;
  }
  if (!done) s = detail::bracket_fixed_point(chi, prior, delta, sigma_w, std::max(s0, 1.0));

  LambdaCalibration cal;
  cal.chi = chi;
  cal.iterations = it;
  cal.sigma_hat = std::sqrt(std::max(s, 0.0));
  if (cal.sigma_hat > 0.0) {
    const double tau = chi * cal.sigma_hat;
    cal.active_fraction = active_probability(prior, cal.sigma_hat, tau);
    cal.mse = scalar_risk(prior, cal.sigma_hat, tau);
    cal.lambda = tau * (1.0 - cal.active_fraction / delta);
  }
  return cal;
}

inline LambdaCalibration se_fixed_point(const SeConfig& c) {
  const auto* f = std::get_if<FixedChi>(&c.policy);
  if (!f) throw InvalidConfig("se_fixed_point needs a FixedChi policy");
  c.validate();
  return se_fixed_point(f->chi, c.prior, c.delta, c.sigma_w);
}

/// All roots of Psi(s) = s found on a log grid of s in [s_min, s_max] (plus s = 0
/// when sigma_w = 0, which is always a fixed point of the noiseless map).
inline std::vector<double> scan_fixed_points(double chi, const SignalPrior& prior, double delta,
                                             double sigma_w, double s_min = 1e-12,
                                             double s_max = 1e4, int points = 400) {
  auto g = [&](double s) { return se_psi(s, chi, prior, delta, sigma_w) - s; };
  std::vector<double> roots;
  if (sigma_w == 0.0) roots.push_back(0.0);
  const double ratio = std::pow(s_max / s_min, 1.0 / (points - 1));
  double a = s_min, ga = g(a);
  for (int i = 1; i < points; ++i) {
    const double b = s_min * std::pow(ratio, i);
    const double gb = g(b);
    if ((ga > 0.0) != (gb > 0.0)) {
      double lo = a, hi = b;
      const bool lo_pos = ga > 0.0;
      for (int k = 0; k < 200 && hi - lo > 1e-15 * hi; ++k) {
        const double mid = 0.5 * (lo + hi);
        ((g(mid) > 0.0) == lo_pos ? lo : hi) = mid;
      }
      roots.push_back(0.5 * (lo + hi));
    }
    a = b;
    ga = gb;
  }
  return roots;
}

/// n log-spaced points on [lo, hi].
inline std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i)
    g[i] = n == 1 ? lo : lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1));
  return g;
}

inline std::vector<double> default_chi_grid() { return log_grid(1e-2, 10.0, 200); }

struct LambdaPath {
  std::vector<LambdaCalibration> points;  // lambda > 0 only, sorted by lambda
  std::vector<double> excluded_chi;       // lambda <= 0 or no finite fixed point
};

/// Fixed point and calibration at every chi of a strictly increasing grid.
inline LambdaPath lambda_path(const SignalPrior& prior, double delta, double sigma_w,
                              const std::vector<double>& chi_grid) {
  for (std::size_t i = 0; i < chi_grid.size(); ++i) {
    if (!(chi_grid[i] > 0.0)) throw InvalidConfig("chi grid must be positive");
    if (i > 0 && !(chi_grid[i] > chi_grid[i - 1]))
      throw InvalidConfig("chi grid must be strictly increasing");
  }
  LambdaPath path;
  for (double chi : chi_grid) {
    try {
      auto cal = se_fixed_point(chi, prior, delta, sigma_w);
      if (cal.lambda > 0.0)
        path.points.push_back(cal);
      else
        path.excluded_chi.push_back(chi);
    } catch (const NonConvergence&) {
      path.excluded_chi.push_back(chi);
    }
  }
  std::stable_sort(path.points.begin(), path.points.end(),
                   [](const auto& a, const auto& b) { return a.lambda < b.lambda; });
  return path;
}

/// Grid-level restatement of the solution-path theorems.
struct PathCertificate {
  bool lambda_increasing_in_chi = true;
  bool active_strictly_decreasing = true;
  bool active_at_most_delta = true;
  int mse_sign_changes = 0;     // of successive differences of MSE along increasing lambda
  bool mse_dips_then_rises = false;  // the single change goes from - to +
};

inline PathCertificate certify_path(const LambdaPath& path, double delta) {
  PathCertificate cert;
  const auto& pts = path.points;
  // points are sorted by lambda; recover chi order to check monotone calibration
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (!(pts[i].chi > pts[i - 1].chi)) cert.lambda_increasing_in_chi = false;
    if (!(pts[i].active_fraction < pts[i - 1].active_fraction)) cert.active_strictly_decreasing = false;
  }
  std::vector<double> diffs;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i].active_fraction > delta) cert.active_at_most_delta = false;
    if (i > 0) diffs.push_back(pts[i].mse - pts[i - 1].mse);
  }
  cert.mse_sign_changes = count_sign_changes(diffs);
  int first = 0, last = 0;
  for (double d : diffs) {
    const int s = sign_with_band(d);
    if (s == 0) continue;
    if (first == 0) first = s;
    last = s;
  }
  cert.mse_dips_then_rises = cert.mse_sign_changes == 1 && first < 0 && last > 0;
  return cert;
}

/// chi minimizing the fixed-point MSE: best point of `chi_grid`, then
/// golden-section refinement between its grid neighbours.
inline LambdaCalibration optimal_fixed_chi(const SignalPrior& prior, double delta, double sigma_w,
                                           const std::vector<double>& chi_grid = default_chi_grid()) {
  auto mse_at = [&](double chi) {
    try {
      return se_fixed_point(chi, prior, delta, sigma_w).mse;
    } catch (const NonConvergence&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  std::size_t best = 0;
  double best_mse = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < chi_grid.size(); ++i) {
    const double m = mse_at(chi_grid[i]);
    if (m < best_mse) {
      best_mse = m;
      best = i;
    }
  }
  double a = chi_grid[best > 0 ? best - 1 : 0];
  double b = chi_grid[std::min(best + 1, chi_grid.size() - 1)];
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - invphi * (b - a), d = a + invphi * (b - a);
  double fc = mse_at(c), fd = mse_at(d);
  for (int i = 0; i < 200 && b - a > 1e-12 * b; ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = mse_at(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = mse_at(d);
    }
  }
  const double chi = 0.5 * (a + b);
  auto cal = se_fixed_point(chi, prior, delta, sigma_w);
  if (cal.mse > best_mse) cal = se_fixed_point(chi_grid[best], prior, delta, sigma_w);
  return cal;
}

/// Slope of the noiseless map at zero, lim_{s->0} Psi(s)/s. Recovery (sigma^t -> 0)
/// happens iff this is below 1, because Psi is concave with Psi(0) = 0.
inline double noiseless_slope_at_zero(double chi, double rho, double delta) {
  const auto prior = SignalPrior::point_mass(1.0, rho * delta);
  const double sigma = 1e-8;
  return scalar_risk(prior, sigma, chi * sigma) / (sigma * sigma) / delta;
}

/// Largest rho for which the noiseless recursion with tau = chi sigma recovers, by bisection.
inline double noiseless_rho_limit(double chi, double delta) {
  if (noiseless_slope_at_zero(chi, 0.0, delta) >= 1.0) return 0.0;
  double lo = 0.0, hi = 1.0;
  if (noiseless_slope_at_zero(chi, hi, delta) < 1.0) return 1.0;
  for (int i = 0; i < 100 && hi - lo > 1e-14; ++i) {
    const double mid = 0.5 * (lo + hi);
    (noiseless_slope_at_zero(chi, mid, delta) < 1.0 ? lo : hi) = mid;
  }
  return lo;
}

/// chi with the highest noiseless phase transition: grid over chi, then
/// golden-section refinement around the best grid point.
inline double maximin_chi(double delta) {
  if (!(delta > 0.0 && delta <= 1.0)) throw InvalidConfig("delta must lie in (0, 1]");
  const auto grid = log_grid(1e-2, 10.0, 200);
  std::size_t best = 0;
  double best_rho = -1.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double r = noiseless_rho_limit(grid[i], delta);
    if (r > best_rho) {
      best_rho = r;
      best = i;
    }
  }
  double a = grid[best > 0 ? best - 1 : 0];
  double b = grid[std::min(best + 1, grid.size() - 1)];
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int i = 0; i < 100 && b - a > 1e-10; ++i) {
    const double c = b - invphi * (b - a), d = a + invphi * (b - a);
    if (noiseless_rho_limit(c, delta) > noiseless_rho_limit(d, delta))
      b = d;
    else
      a = c;
  }
  return 0.5 * (a + b);
}

}  // namespace pamp
