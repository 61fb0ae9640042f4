#include "oracles.hpp"
#include "pamp/rng.hpp"
#include "pamp/shrinkage.hpp"

#include <gtest/gtest.h>

using namespace pamp;

namespace {

SignalPrior sec54_prior() { return SignalPrior::point_mass(1.0, 0.25 * 0.85); }

SignalPrior three_atoms() { return {{{1.0, 0.1}, {-2.0, 0.05}, {0.5, 0.15}}}; }

}  // namespace

TEST(SoftThreshold, Definition) {
  EXPECT_EQ(soft_threshold(3.0, 1.0), 2.0);
  EXPECT_EQ(soft_threshold(-0.5, 1.0), 0.0);
  EXPECT_EQ(soft_threshold(-3.0, 1.0), -2.0);
  for (double x : {-7.5, -1.0, 0.0, 0.3, 12.0}) EXPECT_EQ(soft_threshold(x, 0.0), x);
}

TEST(SoftThreshold, Derivative) {
  EXPECT_EQ(soft_threshold_deriv(2.0, 1.0), 1.0);
  EXPECT_EQ(soft_threshold_deriv(0.5, 1.0), 0.0);
  EXPECT_EQ(soft_threshold_deriv(1.0, 1.0), 0.0);  // kink convention
  const double h = 1e-6;
  EXPECT_NEAR((soft_threshold(2.0 + h, 1.0) - soft_threshold(2.0 - h, 1.0)) / (2 * h), 1.0, 1e-5);
}

TEST(SmoothedSoftThreshold, ReducesToPlainAtZeroBandwidth) {
  for (int i = 0; i < 100; ++i) {
    const double x = -5.0 + 0.1 * i;
    EXPECT_EQ(smoothed_soft_threshold(x, 1.3, {0.0}), soft_threshold(x, 1.3));
  }
}

TEST(SmoothedSoftThreshold, OddSymmetry) {
  for (double tau : {0.0, 0.5, 2.0})
    for (double h : {0.01, 0.3, 2.0}) {
      EXPECT_NEAR(smoothed_soft_threshold(0.0, tau, {h}), 0.0, 1e-15);
      EXPECT_NEAR(smoothed_soft_threshold(0.7, tau, {h}), -smoothed_soft_threshold(-0.7, tau, {h}), 1e-15);
    }
}

TEST(SmoothedSoftThreshold, MatchesNumericalConvolution) {
  EXPECT_NEAR(smoothed_soft_threshold(2.0, 1.0, {0.1}), oracle::smoothed_trapezoid(2.0, 1.0, 0.1), 1e-6);
  Xoshiro256ss r(11);
  for (int i = 0; i < 10; ++i) {
    const double x = 6 * r.uniform() - 3, tau = 2 * r.uniform(), h = 0.05 + r.uniform();
    EXPECT_NEAR(smoothed_soft_threshold(x, tau, {h}), oracle::smoothed_trapezoid(x, tau, h), 1e-6);
  }
}

TEST(SmoothedSoftThreshold, DerivativesMatchFiniteDifferences) {
  Xoshiro256ss r(12);
  for (int i = 0; i < 20; ++i) {
    const double x = 6 * r.uniform() - 3, tau = 2 * r.uniform(), h = 0.05 + r.uniform();
    const double e = 1e-5;
    const double fd1 =
        (smoothed_soft_threshold(x + e, tau, {h}) - smoothed_soft_threshold(x - e, tau, {h})) / (2 * e);
    EXPECT_NEAR(smoothed_soft_threshold_deriv(x, tau, {h}), fd1, 1e-5);
    const double fd2 =
        (smoothed_soft_threshold_deriv(x + e, tau, {h}) - smoothed_soft_threshold_deriv(x - e, tau, {h})) / (2 * e);
    EXPECT_NEAR(smoothed_soft_threshold_deriv2(x, tau, {h}), fd2, 1e-5);
  }
}

TEST(SmoothedSoftThreshold, DerivativeBoundedAndConvergesToPlain) {
  for (double tau : {0.0, 0.5, 2.0})
    for (double h : {1e-3, 0.1, 1.0, 5.0})
      for (int i = 0; i <= 2000; ++i) {
        const double d = smoothed_soft_threshold_deriv(-10.0 + 0.01 * i, tau, {h});
        ASSERT_LE(d, 1.0);
        ASSERT_GE(d, 0.0);
      }
  for (double x : {-3.0, -0.4, 0.2, 1.5, 4.0})
    EXPECT_NEAR(smoothed_soft_threshold_deriv(x, 1.0, {1e-4}), soft_threshold_deriv(x, 1.0), 1e-12);
}

TEST(ScalarRisk, ZeroPriorIdentityDenoiser) {
  for (double s : {0.1, 1.0, 3.0}) EXPECT_NEAR(scalar_risk(SignalPrior::zero(), s, 0.0), s * s, 1e-14 * s * s);
}

TEST(ScalarRisk, ZeroPriorStrictlyDecreasing) {
  double prev = scalar_risk(SignalPrior::zero(), 1.0, 0.0);
  for (int i = 1; i <= 400; ++i) {
    const double r = scalar_risk(SignalPrior::zero(), 1.0, 0.02 * i);
    ASSERT_LT(r, prev) << "tau=" << 0.02 * i;
    prev = r;
  }
}

TEST(ScalarRisk, ZeroPriorNonincreasingOnAnyGrid) {
  double prev = INFINITY;
  for (int i = 0; i <= 100; ++i) {
    const double r = scalar_risk(SignalPrior::zero(), 0.7, 0.5 * i);
    ASSERT_LE(r, prev);
    prev = r;
  }
}

TEST(ScalarRisk, ClosedFormMatchesAdaptiveQuadrature) {
  Xoshiro256ss r(13);
  for (int i = 0; i < 30; ++i) {
    const auto prior = i % 2 ? sec54_prior() : three_atoms();
    const double sigma = 0.05 + 2 * r.uniform(), tau = 4 * sigma * r.uniform();
    EXPECT_NEAR(scalar_risk(prior, sigma, tau), oracle::risk(prior, sigma, tau), 1e-10);
    EXPECT_NEAR(active_probability(prior, sigma, tau), oracle::active(prior, sigma, tau), 1e-10);
  }
}

TEST(ScalarRisk, ClosedFormMatchesHermite64) {
  // 64 Gauss-Hermite nodes lose accuracy on the kinks; agreement is at the 1e-3 level
  for (double g : {0.5, 1.0, 2.0})
    EXPECT_NEAR(scalar_risk(sec54_prior(), 0.3, g * 0.3), scalar_risk_quadrature(sec54_prior(), 0.3, g * 0.3), 2e-3);
}

TEST(ScalarRisk, MatchesMonteCarlo1e7) {
  // sigma = 0.3, 50-point gamma grid; one pass over 10^7 draws for all gammas
  const auto prior = sec54_prior();
  const double sigma = 0.3, eps = prior.nonzero_mass();
  const int G = 50;
  const long N = 10000000;
  std::vector<double> s1(G, 0.0), s2(G, 0.0);
  Xoshiro256ss rng(14);
  for (long i = 0; i < N; ++i) {
    const double b = rng.uniform() < eps ? 1.0 : 0.0;
    const double x = b + sigma * rng.normal();
    for (int g = 0; g < G; ++g) {
      const double e = soft_threshold(x, 0.08 * g * sigma) - b;
      s1[g] += e * e;
      s2[g] += e * e * e * e;
    }
  }
  for (int g = 0; g < G; ++g) {
    const double mean = s1[g] / N, var = s2[g] / N - mean * mean;
    EXPECT_LT(std::abs(mean - scalar_risk(prior, sigma, 0.08 * g * sigma)), 3 * std::sqrt(var / N)) << "g=" << g;
  }
}

TEST(ScalarRisk, DerivativeMatchesFiniteDifference) {
  Xoshiro256ss r(15);
  for (int i = 0; i < 20; ++i) {
    const auto prior = i % 2 ? sec54_prior() : three_atoms();
    const double sigma = 0.1 + r.uniform(), tau = 3 * sigma * r.uniform() + 1e-3, e = 1e-6;
    const double fd = (scalar_risk(prior, sigma, tau + e) - scalar_risk(prior, sigma, tau - e)) / (2 * e);
    EXPECT_NEAR(scalar_risk_deriv(prior, sigma, tau), fd, 1e-6);
  }
}

TEST(ScalarRisk, DerivativeAtZeroThreshold) {
  // sigma = 1: d/dtau at 0 equals 2 E_mu[-2 exp(-mu^2/2) / sqrt(2 pi)]
  const auto prior = three_atoms();
  double expect = prior.zero_mass() * (-4.0 * oracle::phi(0.0));
  for (const auto& a : prior.atoms) expect += a.probability * (-4.0 * oracle::phi(a.value));
  EXPECT_NEAR(scalar_risk_deriv(prior, 1.0, 0.0), expect, 1e-14);
  EXPECT_LT(scalar_risk_deriv(prior, 1.0, 0.0), 0.0);
}

TEST(ScalarRisk, BowlShapeOneSignChange) {
  for (const auto& prior : {sec54_prior(), three_atoms(), SignalPrior::point_mass(5.0, 0.01)})
    for (double sigma : {0.05, 0.3, 1.0}) {  // at sigma far above the atoms the minimum leaves (0, 20 sigma)
      std::vector<double> d;
      for (int i = 1; i < 4000; ++i) d.push_back(scalar_risk_deriv(prior, sigma, 20.0 * sigma * i / 4000));
      EXPECT_EQ(count_sign_changes(d), 1) << "sigma=" << sigma;
      int first = 0;
      for (double v : d)
        if (sign_with_band(v) != 0) {
          first = sign_with_band(v);
          break;
        }
      EXPECT_EQ(first, -1);
    }
}

TEST(ScalarRisk, MinimalRiskIncreasingInSigma) {
  const auto prior = sec54_prior();
  double prev = -1.0;
  for (int i = 1; i <= 60; ++i) {
    const double sigma = 0.02 * i;
    const double m = scalar_risk(prior, sigma, optimal_threshold(prior, sigma));
    ASSERT_GT(m, prev) << sigma;
    prev = m;
  }
}

TEST(ScalarRisk, SteinIdentityByQuadrature) {
  // E(eta - b)^2 = E(eta - b - sigma W)^2 + sigma^2 + 2 sigma^2 E(eta' - 1)
  for (const auto& prior : {sec54_prior(), three_atoms()})
    for (double sigma : {0.2, 1.0})
      for (double tau : {0.0, 0.3, 1.1}) {
        const double lhs = oracle::risk(prior, sigma, tau);
        const double fit = oracle::prior_expect(prior, sigma, tau, [&](double, double x) {
          const double e = soft_threshold(x, tau) - x;
          return e * e;
        });
        const double div = oracle::active(prior, sigma, tau) - 1.0;
        EXPECT_NEAR(lhs, fit + sigma * sigma + 2 * sigma * sigma * div, 1e-8);
      }
}

TEST(ScalarRisk, OptimalThresholdMatchesGridArgmin) {
  for (double sigma : {0.1, 0.3, 0.8}) {
    const auto prior = sec54_prior();
    const double t = optimal_threshold(prior, sigma);
    const double o = oracle::argmin_tau(prior, sigma, 5 * sigma);
    EXPECT_NEAR(scalar_risk(prior, sigma, t), scalar_risk(prior, sigma, o), 1e-12);
    EXPECT_NEAR(t, o, 1e-4);
  }
}

TEST(ScalarRisk, ZeroPriorOptimalThresholdIsCap) {
  EXPECT_NEAR(optimal_threshold(SignalPrior::zero(), 0.5), 20.0, 1e-12);
}

TEST(SignChanges, BandIgnoresTinyValues) {
  EXPECT_EQ(count_sign_changes(std::vector<double>{-1, -1e-13, 1e-13, -1, 2}), 1);
  EXPECT_EQ(count_sign_changes(std::vector<double>{1, -1, 1}), 2);
  EXPECT_EQ(count_sign_changes(std::vector<double>{}), 0);
}
