#pragma once

// Converging-sequence problem instances y = X beta_o + w with X_ij ~ N(0, 1/n).
//
// Randomness layout (all sub-streams of GenConfig::seed, see rng.hpp):
//   "support"      k-subset of {0..p-1}, partial Fisher-Yates
//   "beta_values"  atom choice for each support index, in support order
//   "X", j         column j of X, n normals scaled by 1/sqrt(n)
//   "noise"        w, n normals scaled by sigma_w
// Columns are independent streams, so any column can be regenerated alone.

#include "prior.hpp"
#include "rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

namespace pamp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct GenConfig {
  int p = 1;
  double delta = 1.0;  // n / p
  double rho = 0.0;    // k / n
  SignalPrior prior;   // distribution of the nonzero values (probabilities are relative weights)
  double sigma_w = 0.0;
  std::uint64_t seed = 0;

  // A relative slack of 1e-9 absorbs representation error in delta * p (0.85 * 2000 = 1700).
  int n() const { return static_cast<int>(std::floor(delta * p * (1.0 + 1e-12) + 1e-9)); }
  int k() const { return static_cast<int>(std::floor(rho * n() * (1.0 + 1e-12) + 1e-9)); }

  void validate() const {
    if (p < 1) throw InvalidConfig("p must be positive");
    if (!(delta > 0.0 && delta <= 1.0)) throw InvalidConfig("delta must lie in (0, 1]");
    if (!(rho >= 0.0 && rho <= 1.0)) throw InvalidConfig("rho must lie in [0, 1]");
    if (!(sigma_w >= 0.0) || !std::isfinite(sigma_w)) throw InvalidConfig("sigma_w must be >= 0");
    if (n() < 1) throw InvalidConfig("floor(delta * p) must be at least 1");
    if (k() > p) throw InvalidConfig("k = floor(rho * n) exceeds p");
    prior.validate();
    if (k() > 0) {
      if (prior.atoms.empty()) throw InvalidConfig("prior has no atoms but rho > 0");
      double w = 0.0;
      for (const auto& a : prior.atoms) {
        if (a.value == 0.0) throw InvalidConfig("prior atoms must be nonzero");
        w += a.probability;
      }
      if (!(w > 0.0)) throw InvalidConfig("prior atoms carry no probability");
    }
  }

  /// Prior of a coordinate of beta_o: the atoms reweighted to total mass k/p.
  SignalPrior effective_prior() const {
    return prior.with_nonzero_mass(static_cast<double>(k()) / p);
  }

  friend bool operator==(const GenConfig&, const GenConfig&) = default;
};

struct ProblemInstance {
  GenConfig config;
  Vector beta_o;
  Matrix X;  // n x p, column-major
  Vector w;
  Vector y;

  int n() const { return static_cast<int>(X.rows()); }
  int p() const { return static_cast<int>(X.cols()); }
};

namespace detail {

inline std::vector<int> draw_support(const GenConfig& c) {
  Xoshiro256ss rng(derive_seed(c.seed, "support"));
  std::vector<int> idx(c.p);
  std::iota(idx.begin(), idx.end(), 0);
  const int k = c.k();
  for (int i = 0; i < k; ++i) {
    const auto j = i + static_cast<int>(rng.index(static_cast<std::uint64_t>(c.p - i)));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

inline Vector draw_beta(const GenConfig& c) {
  Vector beta = Vector::Zero(c.p);
  const auto support = draw_support(c);
  if (support.empty()) return beta;
  Xoshiro256ss rng(derive_seed(c.seed, "beta_values"));
  const double total = c.prior.nonzero_mass();
  for (int i : support) {
    double u = rng.uniform() * total;
    double value = c.prior.atoms.back().value;
    for (const auto& a : c.prior.atoms) {
      if (u < a.probability) {
        value = a.value;
        break;
      }
      u -= a.probability;
    }
    beta(i) = value;
  }
  return beta;
}

inline void fill_column(const GenConfig& c, int n, int j, Eigen::Ref<Vector> col) {
  Xoshiro256ss rng(derive_seed(c.seed, "X", static_cast<std::uint64_t>(j)));
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (int i = 0; i < n; ++i) col(i) = rng.normal() * scale;
}

inline Vector draw_noise(const GenConfig& c, int n) {
  Vector w(n);
  if (c.sigma_w == 0.0) return Vector::Zero(n);
  Xoshiro256ss rng(derive_seed(c.seed, "noise"));
  for (int i = 0; i < n; ++i) w(i) = rng.normal() * c.sigma_w;
  return w;
}

}  // namespace detail

/// Deterministic in `config.seed`.
inline ProblemInstance generate(const GenConfig& config) {
  config.validate();
  const int n = config.n();
  ProblemInstance inst;
  inst.config = config;
  inst.beta_o = detail::draw_beta(config);
  inst.X.resize(n, config.p);
  for (int j = 0; j < config.p; ++j) detail::fill_column(config, n, j, inst.X.col(j));
  inst.w = detail::draw_noise(config, n);
  inst.y.noalias() = inst.X * inst.beta_o;
  inst.y += inst.w;
  return inst;
}

/// l2 norm of every column of X.
inline Vector column_norms(const ProblemInstance& inst) { return inst.X.colwise().norm().transpose(); }

/// Column norms regenerated column by column without materializing X.
inline Vector column_norms_streamed(const GenConfig& config) {
  config.validate();
  const int n = config.n();
  Vector col(n), norms(config.p);
  for (int j = 0; j < config.p; ++j) {
    detail::fill_column(config, n, j, col);
    norms(j) = col.norm();
  }
  return norms;
}

/// What the first AMP iteration sees: beta^0 = 0, z^0 = y, pseudo-data X^T y.
struct FirstIterate {
  Vector beta_o;
  Vector pseudo_data;
  double sigma_hat = 0.0;  // ||y|| / sqrt(n)
  int n = 0;
};

/// X^T y for the instance `generate(config)` would build, in O(n + p) memory.
/// Bitwise identical X columns; y may differ from the dense path in the last ulp
/// because the product is summed in a different order.
inline FirstIterate first_iterate_streamed(const GenConfig& config) {
  config.validate();
  const int n = config.n();
  FirstIterate out;
  out.n = n;
  out.beta_o = detail::draw_beta(config);
  Vector y = detail::draw_noise(config, n);
  Vector col(n);
  for (int j = 0; j < config.p; ++j) {
    if (out.beta_o(j) == 0.0) continue;
    detail::fill_column(config, n, j, col);
    y += out.beta_o(j) * col;
  }
  out.sigma_hat = y.norm() / std::sqrt(static_cast<double>(n));
  out.pseudo_data.resize(config.p);
  for (int j = 0; j < config.p; ++j) {
    detail::fill_column(config, n, j, col);
    out.pseudo_data(j) = col.dot(y);
  }
  return out;
}

/// (1/p) ||a - b||^2
inline double mean_sq_diff(const Vector& a, const Vector& b) {
  return (a - b).squaredNorm() / static_cast<double>(a.size());
}

}  // namespace pamp
