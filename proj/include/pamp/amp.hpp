#pragma once

// Approximate message passing:
//   beta^{t+1} = eta(beta^t + X^T z^t; tau^t)
//   z^{t+1}    = y - X beta^{t+1} + (|I^{t+1}| / n) z^t,   I = supp(beta^{t+1})
// started from beta^0 = 0, z^0 = y. The effective noise is tracked by
// sigma_hat = ||z|| / sqrt(n); the true sigma^t is never assumed known.

#include "problem.hpp"
#include "shrinkage.hpp"

#include <cmath>
#include <cstdint>

namespace pamp {

/// Work counters. One matrix-vector product over an n x p matrix counts n*p elements.
struct OpCounter {
  std::int64_t matvecs = 0;
  double matvec_elements = 0.0;
  double tuner_elements = 0.0;  // scalar passes over pseudo-data made by threshold tuning

  void add_matvec(const ProblemInstance& inst) {
    ++matvecs;
    matvec_elements += static_cast<double>(inst.n()) * inst.p();
  }
};

struct AmpState {
  int t = 0;
  Vector beta;
  Vector z;
  Vector pseudo_data;  // beta^t + X^T z^t
  double sigma_hat = 0.0;
  int active_count = 0;
  double tau_used = 0.0;  // threshold that produced beta^t

  /// Nothing left to estimate: the residual is exactly zero.
  bool terminal() const { return sigma_hat == 0.0; }
};

inline AmpState amp_init(const ProblemInstance& inst, OpCounter* ops = nullptr) {
  AmpState s;
  s.beta = Vector::Zero(inst.p());
  s.z = inst.y;
  s.pseudo_data.noalias() = inst.X.transpose() * s.z;
  if (ops) ops->add_matvec(inst);
  s.sigma_hat = s.z.norm() / std::sqrt(static_cast<double>(inst.n()));
  return s;
}

/// One AMP iteration at threshold tau: exactly two matrix-vector products.
inline AmpState amp_step(const AmpState& s, const ProblemInstance& inst, double tau,
                         OpCounter* ops = nullptr) {
  const int n = inst.n();
  AmpState next;
  next.t = s.t + 1;
  next.tau_used = tau;
  next.beta.resize(inst.p());
  int active = 0;
  for (Eigen::Index i = 0; i < s.pseudo_data.size(); ++i) {
    const double b = soft_threshold(s.pseudo_data(i), tau);
    next.beta(i) = b;
    active += b != 0.0;
  }
  next.active_count = active;
  const double onsager = static_cast<double>(active) / n;
  next.z.noalias() = inst.X * next.beta;
  next.z = inst.y - next.z + onsager * s.z;
  next.pseudo_data.noalias() = inst.X.transpose() * next.z;
  next.pseudo_data += next.beta;
  if (ops) {
    ops->add_matvec(inst);
    ops->add_matvec(inst);
  }
  next.sigma_hat = next.z.norm() / std::sqrt(static_cast<double>(n));
  return next;
}

}  // namespace pamp
