#pragma once

// Standard normal density/CDF and a Gauss-Hermite rule for E[f(W)], W ~ N(0,1).

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <vector>

namespace pamp {

inline double normal_pdf(double x) noexcept {
  return std::exp(-0.5 * x * x) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
}

inline double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0); }

/// Upper tail 1 - Phi(x), accurate for large x.
inline double normal_sf(double x) noexcept { return normal_cdf(-x); }

/// Nodes and weights of the probabilists' Gauss-Hermite rule:
/// sum_i w_i f(x_i) approximates E[f(W)], weights sum to 1.
struct HermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  /// Golub-Welsch on the Jacobi matrix of the monic probabilists' Hermite polynomials.
  static HermiteRule make(int n) {
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd sub(n > 1 ? n - 1 : 0);
    for (int i = 1; i < n; ++i) sub(i - 1) = std::sqrt(static_cast<double>(i));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    HermiteRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < n; ++i) {
      rule.nodes[i] = es.eigenvalues()(i);
      const double v0 = es.eigenvectors()(0, i);
      rule.weights[i] = v0 * v0;
    }
    return rule;
  }

  template <class F>
  double expect(F&& f) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) acc += weights[i] * f(nodes[i]);
    return acc;
  }
};

inline const HermiteRule& hermite64() {
  static const HermiteRule rule = HermiteRule::make(64);
  return rule;
}

}  // namespace pamp
