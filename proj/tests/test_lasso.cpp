#include "oracles.hpp"
#include "pamp/lasso.hpp"

#include <gtest/gtest.h>

using namespace pamp;

namespace {

ProblemInstance small(int n, int p, std::uint64_t seed, double sigma_w = 0.1) {
  GenConfig c{p, double(n) / p, 0.2, SignalPrior::point_mass(1.0, 1.0), sigma_w, seed};
  return generate(c);
}

}  // namespace

TEST(Lasso, ZeroAboveLambdaMax) {
  const auto inst = small(60, 100, 1);
  const double lmax = (inst.X.transpose() * inst.y).lpNorm<Eigen::Infinity>();
  const auto sol = solve_lasso(inst, lmax * 1.0001);
  EXPECT_EQ(sol.beta_hat.lpNorm<Eigen::Infinity>(), 0.0);
  EXPECT_EQ(sol.status, LassoStatus::Converged);
  EXPECT_NE(solve_lasso(inst, lmax * 0.9).beta_hat.lpNorm<1>(), 0.0);
}

TEST(Lasso, OrthonormalClosedForm) {
  Xoshiro256ss r(2);
  Matrix A(40, 40);
  for (int i = 0; i < A.size(); ++i) A.data()[i] = r.normal();
  const Matrix Q = Eigen::HouseholderQR<Matrix>(A).householderQ();
  Vector beta = Vector::Zero(40);
  beta.head(5).setOnes();
  Vector w(40);
  for (int i = 0; i < 40; ++i) w(i) = 0.3 * r.normal();
  const auto inst = oracle::make_instance(Q, beta, w);
  const Vector u = Q.transpose() * inst.y;
  for (double lambda : {0.05, 0.3, 0.8}) {
    const auto sol = solve_lasso(inst, lambda);
    for (int j = 0; j < 40; ++j) EXPECT_NEAR(sol.beta_hat(j), soft_threshold(u(j), lambda), 1e-10);
  }
}

TEST(Lasso, MatchesProximalGradient) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto inst = small(30, 50, seed);
    const double lmax = (inst.X.transpose() * inst.y).lpNorm<Eigen::Infinity>();
    for (double frac : {0.05, 0.3}) {
      const double lambda = frac * lmax;
      const auto sol = solve_lasso(inst, lambda, {.tol = 1e-12, .kkt_tol = 1e-10});
      const Vector ref = oracle::lasso_fista(inst.X, inst.y, lambda);
      EXPECT_LT((sol.beta_hat - ref).lpNorm<Eigen::Infinity>(), 1e-6) << "seed " << seed << " frac " << frac;
    }
  }
}

TEST(Lasso, ObjectiveNonincreasingAcrossSweeps) {
  const auto inst = small(200, 400, 3, 0.2);
  const auto sol = solve_lasso(inst, 0.05, {.track_objective = true});
  ASSERT_GT(sol.objective.size(), 2u);
  for (std::size_t i = 1; i < sol.objective.size(); ++i)
    EXPECT_LE(sol.objective[i], sol.objective[i - 1] * (1 + 1e-13)) << "sweep " << i;
  EXPECT_NEAR(sol.objective.back(), lasso_objective(inst.X, inst.y, sol.beta_hat, 0.05), 1e-9);
}

TEST(Lasso, KktCertified) {
  const auto inst = small(300, 500, 4, 0.2);
  for (double lambda : {0.02, 0.1, 0.4}) {
    const auto sol = solve_lasso(inst, lambda);
    EXPECT_EQ(sol.status, LassoStatus::Converged);
    EXPECT_LE(sol.kkt_gap, 1e-6);
    EXPECT_NEAR(sol.kkt_gap, lasso_kkt_gap(inst.X, inst.y, sol.beta_hat, lambda), 1e-12);
    // independent check of the optimality conditions
    const Vector g = inst.X.transpose() * (inst.y - inst.X * sol.beta_hat);
    for (Eigen::Index j = 0; j < g.size(); ++j) {
      if (sol.beta_hat(j) != 0.0)
        EXPECT_NEAR(g(j), lambda * (sol.beta_hat(j) > 0 ? 1 : -1), 1e-6);
      else
        EXPECT_LE(std::abs(g(j)), lambda + 1e-6);
    }
  }
}

TEST(Lasso, SweepLimitReportsBestSoFar) {
  const auto inst = small(200, 400, 5, 0.2);
  const auto sol = solve_lasso(inst, 0.01, {.max_sweeps = 2});
  EXPECT_EQ(sol.status, LassoStatus::MaxIterations);
  EXPECT_GT(sol.kkt_gap, 1e-6);
  EXPECT_NEAR(sol.kkt_gap, lasso_kkt_gap(inst.X, inst.y, sol.beta_hat, 0.01), 1e-12);
}

TEST(Lasso, RejectsNonPositiveLambda) {
  const auto inst = small(20, 40, 6);
  EXPECT_THROW(solve_lasso(inst, 0.0), InvalidConfig);
  EXPECT_THROW(solve_lasso(inst, -1.0), InvalidConfig);
}

TEST(Lasso, WarmStartSameAnswerFewerSweeps) {
  const auto inst = small(300, 500, 7, 0.2);
  const LassoOptions tight{.tol = 1e-12, .kkt_tol = 1e-10};
  const auto a = solve_lasso(inst, 0.06, tight);
  const auto cold = solve_lasso(inst, 0.05, tight);
  const auto warm = solve_lasso(inst, 0.05, tight, a.beta_hat);
  EXPECT_LT((cold.beta_hat - warm.beta_hat).lpNorm<Eigen::Infinity>(), 1e-6);
  EXPECT_LE(warm.iterations, cold.iterations);
}

TEST(LassoPath, SparsityAndActiveBound) {
  // N(0,1/n) rendering of the Fig. 2 setup at reduced size
  GenConfig c{1000, 0.5, 0.1, SignalPrior::point_mass(1.0, 1.0), std::sqrt(0.7 / 500), 3};
  const auto inst = generate(c);
  const double top = 4.0 * optimal_fixed_chi(c.effective_prior(), 0.5, c.sigma_w).lambda;
  std::vector<double> grid;
  for (int i = 50; i >= 1; --i) grid.push_back(top * i / 50);
  const auto path = lasso_path(inst, grid);
  int violations = 0;
  for (std::size_t i = 0; i < path.size(); ++i) {
    EXPECT_EQ(path[i].status, LassoStatus::Converged);
    EXPECT_LE(path[i].l0_fraction, 0.5 + 0.02);
    if (i > 0 && path[i].l0_fraction < path[i - 1].l0_fraction) ++violations;  // lambda decreasing
  }
  EXPECT_LE(violations, 2);
}
