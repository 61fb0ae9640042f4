#pragma once

// LASSO reference solver: argmin_beta (1/2) ||y - X beta||^2 + lambda ||beta||_1
// by cyclic coordinate descent on a maintained residual, with active-set
// passes between full sweeps and a KKT certificate on exit.

#include "problem.hpp"
#include "shrinkage.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

namespace pamp {

enum class LassoStatus { Converged, MaxIterations };

struct LassoOptions {
  double tol = 1e-8;       // max coordinate change < tol * (1 + ||beta||_inf)
  double kkt_tol = 1e-6;
  int max_sweeps = 100000;
  bool track_objective = false;
};

struct LassoSolution {
  Vector beta_hat;
  double lambda = 0.0;
  double kkt_gap = 0.0;
  int iterations = 0;  // coordinate sweeps, full or active-set
  LassoStatus status = LassoStatus::Converged;
  std::vector<double> objective;  // per sweep, when tracked
};

inline double lasso_objective(const Matrix& X, const Vector& y, const Vector& beta, double lambda) {
  return 0.5 * (y - X * beta).squaredNorm() + lambda * beta.lpNorm<1>();
}

/// max over j of the subgradient-condition violation at beta.
inline double lasso_kkt_gap(const Matrix& X, const Vector& y, const Vector& beta, double lambda) {
  const Vector g = X.transpose() * (y - X * beta);
  double gap = 0.0;
  for (Eigen::Index j = 0; j < g.size(); ++j) {
    const double v = beta(j) == 0.0 ? std::max(0.0, std::abs(g(j)) - lambda)
                                    : std::abs(g(j) - lambda * (beta(j) > 0.0 ? 1.0 : -1.0));
    gap = std::max(gap, v);
  }
  return gap;
}

inline LassoSolution solve_lasso(const Matrix& X, const Vector& y, double lambda,
                                 const LassoOptions& opt = {},
                                 const std::optional<Vector>& warm_start = std::nullopt) {
  if (!(lambda > 0.0)) throw InvalidConfig("lambda must be positive");
  const Eigen::Index p = X.cols();
  LassoSolution sol;
  sol.lambda = lambda;
  sol.beta_hat = warm_start ? *warm_start : Vector::Zero(p);
  if (sol.beta_hat.size() != p) throw InvalidConfig("warm start has wrong length");
  Vector& beta = sol.beta_hat;
  const Vector col_sq = X.colwise().squaredNorm().transpose();
  Vector r = y - X * beta;

  auto objective = [&] { return 0.5 * r.squaredNorm() + lambda * beta.lpNorm<1>(); };
  auto update = [&](Eigen::Index j) {
    if (col_sq(j) == 0.0) return 0.0;
    const double old = beta(j);
    const double rho = X.col(j).dot(r) + col_sq(j) * old;
    const double nb = soft_threshold(rho, lambda) / col_sq(j);
    if (nb != old) {
      r.noalias() -= (nb - old) * X.col(j);
      beta(j) = nb;
    }
    return std::abs(nb - old);
  };

  double tol = opt.tol;
  bool full = true;
  std::vector<Eigen::Index> active;
  while (sol.iterations < opt.max_sweeps) {
    double max_change = 0.0;
    if (full) {
      for (Eigen::Index j = 0; j < p; ++j) max_change = std::max(max_change, update(j));
      active.clear();
      for (Eigen::Index j = 0; j < p; ++j)
        if (beta(j) != 0.0) active.push_back(j);
    } else {
      for (auto j : active) max_change = std::max(max_change, update(j));
    }
    ++sol.iterations;
    if (opt.track_objective) sol.objective.push_back(objective());
    const bool small = max_change < tol * (1.0 + beta.lpNorm<Eigen::Infinity>());
    if (!small) {
      full = false;
      continue;
    }
    if (!full) {
      full = true;  // active set settled: confirm with a full sweep
      continue;
    }
    r = y - X * beta;
    sol.kkt_gap = lasso_kkt_gap(X, y, beta, lambda);
    if (sol.kkt_gap <= opt.kkt_tol) return sol;
    tol *= 0.1;
    full = false;
  }
  sol.kkt_gap = lasso_kkt_gap(X, y, beta, lambda);
  sol.status = sol.kkt_gap <= opt.kkt_tol ? LassoStatus::Converged : LassoStatus::MaxIterations;
  return sol;
}

inline LassoSolution solve_lasso(const ProblemInstance& inst, double lambda,
                                 const LassoOptions& opt = {},
                                 const std::optional<Vector>& warm_start = std::nullopt) {
  return solve_lasso(inst.X, inst.y, lambda, opt, warm_start);
}

/// One row of a path table.
struct LassoPathPoint {
  double lambda = 0.0;
  double l0_fraction = 0.0;
  double mse = 0.0;
  double kkt_gap = 0.0;
  int iterations = 0;
  LassoStatus status = LassoStatus::Converged;
};

/// Warm-started solves along `lambda_grid` (pass it decreasing for efficient warm starts).
inline std::vector<LassoPathPoint> lasso_path(const ProblemInstance& inst,
                                              const std::vector<double>& lambda_grid,
                                              const LassoOptions& opt = {},
                                              std::vector<LassoSolution>* solutions = nullptr) {
  std::vector<LassoPathPoint> rows;
  std::optional<Vector> warm;
  for (double lam : lambda_grid) {
    auto sol = solve_lasso(inst, lam, opt, warm);
    warm = sol.beta_hat;
    LassoPathPoint pt;
    pt.lambda = lam;
    pt.l0_fraction = static_cast<double>((sol.beta_hat.array() != 0.0).count()) / inst.p();
    pt.mse = mean_sq_diff(sol.beta_hat, inst.beta_o);
    pt.kkt_gap = sol.kkt_gap;
    pt.iterations = sol.iterations;
    pt.status = sol.status;
    rows.push_back(pt);
    if (solutions) solutions->push_back(std::move(sol));
  }
  return rows;
}

}  // namespace pamp
