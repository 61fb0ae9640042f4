#pragma once

// Soft thresholding, its Gaussian-smoothed variant, and the exact risk of the
// soft threshold under a discrete prior observed in Gaussian noise.

#include "gaussian.hpp"
#include "prior.hpp"

#include <algorithm>
#include <cmath>

namespace pamp {

/// Gaussian kernel bandwidth of the smoothed soft threshold; h = 0 is the plain kernel.
struct SmoothingBandwidth {
  double h = 0.0;

  friend bool operator==(const SmoothingBandwidth&, const SmoothingBandwidth&) = default;
};

/// (|x| - tau)_+ sign(x)
inline double soft_threshold(double x, double tau) noexcept {
  if (x > tau) return x - tau;
  if (x < -tau) return x + tau;
  return 0.0;
}

/// Weak derivative in x. At the kink |x| = tau the value is 0.
inline double soft_threshold_deriv(double x, double tau) noexcept {
  return std::abs(x) > tau ? 1.0 : 0.0;
}

/// E[eta(x + h Z; tau)], Z ~ N(0,1), in closed form.
inline double smoothed_soft_threshold(double x, double tau, SmoothingBandwidth bw) noexcept {
  const double h = bw.h;
  if (h <= 0.0) return soft_threshold(x, tau);
  const double c_hi = (tau - x) / h;
  const double c_lo = (-tau - x) / h;
  return (x - tau) * normal_sf(c_hi) + h * normal_pdf(c_hi) + (x + tau) * normal_cdf(c_lo) -
         h * normal_pdf(c_lo);
}

inline double smoothed_soft_threshold_deriv(double x, double tau, SmoothingBandwidth bw) noexcept {
  const double h = bw.h;
  if (h <= 0.0) return soft_threshold_deriv(x, tau);
  return normal_cdf((x - tau) / h) + normal_cdf((-tau - x) / h);
}

inline double smoothed_soft_threshold_deriv2(double x, double tau, SmoothingBandwidth bw) noexcept {
  const double h = bw.h;
  if (h <= 0.0) return 0.0;
  return (normal_pdf((x - tau) / h) - normal_pdf((x + tau) / h)) / h;
}

/// Prior, effective noise level sigma and threshold tau of one scalar denoising problem.
struct ScalarRiskQuery {
  SignalPrior prior;
  double sigma = 1.0;
  double tau = 0.0;

  double gamma() const { return tau / sigma; }
};

namespace detail {

// Risk of eta(mu + sigma W; tau) against mu. Split over {X > tau}, {X < -tau}
// and the dead zone, using the partial moments of W.
inline double atom_risk(double mu, double sigma, double tau) noexcept {
  const double a = (tau - mu) / sigma;
  const double b = (-tau - mu) / sigma;
  const double s2t2 = sigma * sigma + tau * tau;
  const double upper = s2t2 * normal_sf(a) - sigma * (tau + mu) * normal_pdf(a);
  const double lower = s2t2 * normal_cdf(b) - sigma * (tau - mu) * normal_pdf(b);
  const double dead = mu * mu * (normal_cdf(a) - normal_cdf(b));
  return upper + lower + dead;
}

inline double atom_risk_deriv(double mu, double sigma, double tau) noexcept {
  const double a = (tau - mu) / sigma;
  const double b = (-tau - mu) / sigma;
  return 2.0 * (tau * (normal_sf(a) + normal_cdf(b)) - sigma * (normal_pdf(a) + normal_pdf(b)));
}

inline double atom_active_probability(double mu, double sigma, double tau) noexcept {
  return normal_sf((tau - mu) / sigma) + normal_cdf((-tau - mu) / sigma);
}

template <class F>
double mix(const SignalPrior& prior, F&& per_atom) {
  double acc = prior.zero_mass() * per_atom(0.0);
  for (const auto& a : prior.atoms)
    if (a.probability > 0.0) acc += a.probability * per_atom(a.value);
  return acc;
}

}  // namespace detail

/// E(eta(B + sigma W; tau) - B)^2, closed form. Requires sigma > 0.
inline double scalar_risk(const SignalPrior& prior, double sigma, double tau) {
  const double r =
      detail::mix(prior, [&](double mu) { return detail::atom_risk(mu, sigma, tau); });
  return std::max(r, 0.0);
}

inline double scalar_risk(const ScalarRiskQuery& q) { return scalar_risk(q.prior, q.sigma, q.tau); }

/// d/dtau of scalar_risk.
inline double scalar_risk_deriv(const SignalPrior& prior, double sigma, double tau) {
  return detail::mix(prior, [&](double mu) { return detail::atom_risk_deriv(mu, sigma, tau); });
}

inline double scalar_risk_deriv(const ScalarRiskQuery& q) {
  return scalar_risk_deriv(q.prior, q.sigma, q.tau);
}

/// P(|B + sigma W| > tau).
inline double active_probability(const SignalPrior& prior, double sigma, double tau) {
  return detail::mix(prior,
                     [&](double mu) { return detail::atom_active_probability(mu, sigma, tau); });
}

/// Gauss-Hermite evaluation of scalar_risk; cross-check path usable for any atom set.
inline double scalar_risk_quadrature(const SignalPrior& prior, double sigma, double tau,
                                     const HermiteRule& rule = hermite64()) {
  return detail::mix(prior, [&](double mu) {
    return rule.expect([&](double w) {
      const double e = soft_threshold(mu + sigma * w, tau) - mu;
      return e * e;
    });
  });
}

/// Derivative values with magnitude below this are treated as zero when counting sign changes.
inline constexpr double kSignZeroBand = 1e-12;

inline int sign_with_band(double v, double band = kSignZeroBand) noexcept {
  if (v > band) return 1;
  if (v < -band) return -1;
  return 0;
}

/// Number of sign changes in a sampled sequence, ignoring entries inside the zero band.
template <class Range>
int count_sign_changes(const Range& values, double band = kSignZeroBand) {
  int last = 0;
  int changes = 0;
  for (double v : values) {
    const int s = sign_with_band(v, band);
    if (s == 0) continue;
    if (last != 0 && s != last) ++changes;
    last = s;
  }
  return changes;
}

/// argmin over tau >= 0 of scalar_risk(prior, sigma, tau), by bisection on the
/// derivative (the risk is bowl-shaped whenever the prior is not all zero).
/// For the zero prior the risk keeps decreasing and the search cap is returned.
inline double optimal_threshold(const SignalPrior& prior, double sigma) {
  double max_abs = 0.0;
  for (const auto& a : prior.atoms) max_abs = std::max(max_abs, std::abs(a.value));
  const double cap = max_abs + 40.0 * sigma;

  double lo = 0.0;
  double hi = sigma;
  while (scalar_risk_deriv(prior, sigma, hi) <= 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi >= cap) {
      hi = cap;
      if (scalar_risk_deriv(prior, sigma, hi) <= 0.0) return cap;
      break;
    }
  }
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (scalar_risk_deriv(prior, sigma, mid) > 0.0)
      hi = mid;
    else
      lo = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace pamp
