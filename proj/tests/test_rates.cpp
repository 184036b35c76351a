#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mfbrw/rates.hpp"
#include "test_support.hpp"

using namespace mfbrw;

namespace {

std::vector<double> random_omega(std::mt19937_64& rng, int n, double norm) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> x(n);
  double t = 0.0;
  for (auto& v : x) t += (v = u(rng));
  for (auto& v : x) v *= norm / t;
  return x;
}

}  // namespace

TEST(Pressure, ZeroAtOriginAndCriticalValue) {
  for (unsigned seed = 1; seed <= 5; ++seed) {
    const RateModel m(testing_support::random_symmetric(2, seed, 0.1 * (seed % 3)));
    EXPECT_NEAR(m.pressure(0.0), 0.0, 1e-12);
    EXPECT_NEAR(m.hat_pressure(m.lnR()), 0.0, 1e-12);
  }
  const RateModel iso(StepDistribution::isotropic(2));
  EXPECT_NEAR(iso.pressure(iso.lnR()), 0.5 * std::log(3.0), 1e-12);
  EXPECT_NEAR(iso.escape_rate(), 0.5, 1e-12);
}

TEST(Pressure, SlopeAtLeastOneAndMatchesDifferences) {
  const RateModel m(StepDistribution::from_generators(2, 0.1, {0.3, 0.15}));
  for (int i = 0; i < 100; ++i) {
    const double s = m.lnR() - 1e-2 - 20.0 * i / 99.0;
    const double d = m.pressure_prime(s);
    EXPECT_GE(d, 1.0);
    const double h = 1e-6;
    const double fd = (m.pressure(s + h) - m.pressure(s - h)) / (2 * h);
    EXPECT_NEAR(d / fd, 1.0, 1e-6) << s;
    EXPECT_GE(m.hat_pressure_prime(s), 1.0);
  }
}

TEST(Pressure, IsotropicShiftIsConstant) {
  const RateModel m(StepDistribution::isotropic(3, 0.2));
  const double c = m.hat_pressure(0.0) - m.pressure(0.0);
  for (int i = 0; i < 40; ++i) {
    const double s = m.lnR() - 15.0 * i / 39.0;
    EXPECT_NEAR(m.hat_pressure(s) - m.pressure(s), c, 1e-9);
  }
}

TEST(PsiStar, BoundaryCases) {
  const auto mu = StepDistribution::from_generators(2, 0.1, {0.3, 0.15});
  const RateModel m(mu);
  EXPECT_DOUBLE_EQ(m.psi_star({0, 0, 0, 0}), -m.lnR());
  const std::vector<double> xi{0.1, 0.2, 0.3, 0.4};
  double expect = 0.0;
  for (int a = 0; a < 4; ++a) expect += xi[a] * std::log(mu.weights()[a]);
  EXPECT_NEAR(m.psi_star(xi), expect, 1e-15);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    const auto x = random_omega(rng, 4, std::uniform_real_distribution<double>(0.02, 0.98)(rng));
    double bound = -m.lnR();
    for (int a = 0; a < 4; ++a) bound += x[a] * m.psi_at_radius()[a];
    EXPECT_LE(m.psi_star(x), bound + 1e-12);
    EXPECT_LE(m.psi_star(x), -m.lnR() + 1e-12);
  }
  EXPECT_THROW(m.psi_star({0.5, 0.5, 0.5, 0.0}), Error);
}

TEST(PsiStar, SOfXiResidualAndLimits) {
  const RateModel m(testing_support::random_symmetric(2, 4, 0.05));
  std::mt19937_64 rng(2);
  for (int i = 0; i < 30; ++i) {
    const auto x = random_omega(rng, 4, std::uniform_real_distribution<double>(0.05, 0.95)(rng));
    const auto r = m.s_of_xi(x);
    EXPECT_FALSE(r.saturated_low || r.saturated_high);
    EXPECT_LT(std::abs(r.residual), 1e-10);
  }
  const auto small = m.s_of_xi(random_omega(rng, 4, 1e-6));
  EXPECT_GT(small.s, m.lnR() - 1e-6);
  const auto near_one = m.s_of_xi(random_omega(rng, 4, 1.0 - 1e-12));
  EXPECT_LT(near_one.s, m.lnR() - 20.0);
}

TEST(PsiStar, ConcaveDecreasingAndGradient) {
  const RateModel m(StepDistribution::from_generators(2, 0.0, {0.35, 0.15}));
  std::mt19937_64 rng(3);
  for (int i = 0; i < 10; ++i) {
    const auto a = random_omega(rng, 4, 0.3);
    const auto b = random_omega(rng, 4, 0.8);
    std::vector<double> mid(4);
    for (int k = 0; k < 4; ++k) mid[k] = 0.5 * (a[k] + b[k]);
    EXPECT_GE(m.psi_star(mid), 0.5 * m.psi_star(a) + 0.5 * m.psi_star(b) - 1e-10);
    const auto xi = random_omega(rng, 4, 1.0);
    double prev = m.psi_star(std::vector<double>(4, 0.0));
    for (int j = 1; j <= 20; ++j) {
      std::vector<double> x(4);
      for (int k = 0; k < 4; ++k) x[k] = xi[k] * j / 20.0;
      const double v = m.psi_star(x);
      EXPECT_LT(v, prev);
      prev = v;
    }
    const auto grad = m.psi_star_gradient(a);
    for (int k = 0; k < 4; ++k) {
      auto p = a;
      auto q = a;
      p[k] += 1e-6;
      q[k] -= 1e-6;
      EXPECT_NEAR(grad[k], (m.psi_star(p) - m.psi_star(q)) / 2e-6, 1e-6);
    }
  }
}

TEST(RateL, BoundaryValues) {
  for (unsigned seed = 1; seed <= 4; ++seed) {
    const RateModel m(testing_support::random_symmetric(2, seed, 0.1));
    EXPECT_DOUBLE_EQ(m.rate_L(0.0), m.lnR());
    EXPECT_NEAR(m.rate_L(m.escape_rate()), 0.0, 1e-12);
    EXPECT_NEAR(m.rate_L_minimax(0.0).value, m.lnR(), 1e-15);
  }
  const RateModel iso(StepDistribution::isotropic(2));
  EXPECT_NEAR(iso.rate_L(1.0), std::log(4.0 / 3.0), 1e-12);
  // Laziness multiplies the straight-line probability by (1 - mu_e)^n.
  const RateModel lazy(StepDistribution::isotropic(3, 0.25));
  EXPECT_NEAR(lazy.rate_L(1.0), -std::log(0.75 * 5.0 / 6.0), 1e-12);
}

TEST(RateL, ConvexNonnegativeAndSlope) {
  const RateModel m(StepDistribution::from_generators(2, 0.05, {0.4, 0.075}));
  const int n = 200;
  std::vector<double> q(n + 1);
  for (int i = 0; i <= n; ++i) q[i] = static_cast<double>(i) / n;
  const auto prof = m.rate_profile(q, 1);
  for (int i = 0; i <= n; ++i) EXPECT_GE(prof.Lstar[i], -1e-14);
  for (int i = 1; i < n; ++i) EXPECT_GE(prof.Lstar[i + 1] - 2 * prof.Lstar[i] + prof.Lstar[i - 1], -1e-8);
  // Slope identity against grid differentiation with spacing 1e-3.
  for (int i = 1; i <= 45; ++i) {
    const double x = 0.02 * i;
    const double h = 1e-3;
    const double fd = (m.rate_L(x + h) - m.rate_L(x - h)) / (2 * h);
    EXPECT_NEAR(m.rate_L_legendre(x).slope, fd, 1e-4) << x;
  }
  EXPECT_NEAR(-m.rate_L_legendre(0.0).slope, m.pressure(m.lnR()), 1e-12);
  const double h = 1e-7;
  EXPECT_NEAR(-(m.rate_L(h) - m.rate_L(0.0)) / h, m.pressure(m.lnR()), 1e-6);
}

TEST(RateL, RoutesAgree) {
  for (unsigned seed = 1; seed <= 3; ++seed) {
    const RateModel m(testing_support::random_symmetric(2, seed + 20, 0.1 * seed));
    for (int i = 0; i <= 20; ++i) {
      const double q = i / 20.0;
      EXPECT_NEAR(m.rate_L_legendre(q).value, m.rate_L_minimax(q).value, 1e-9) << q;
    }
  }
  const RateModel iso(StepDistribution::isotropic(2));
  const auto mm = iso.rate_L_minimax(0.3);
  for (double x : mm.xi) EXPECT_NEAR(x, 0.25, 1e-6);
  EXPECT_NO_THROW(iso.rate_L_checked(0.3));
}

TEST(RateL, ForcedRouteMismatch) {
  const RateModel m(StepDistribution::from_generators(2, 0.1, {0.3, 0.15}));
  try {
    m.rate_L_checked(0.4, 0.0);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::route_mismatch);
    EXPECT_NE(std::string(e.what()).find("Legendre"), std::string::npos);
  }
}

TEST(Hypothesis, IsotropicHolds) {
  const RateModel m(StepDistribution::isotropic(2));
  const auto rep = m.hypothesis_one(m.default_s_grid());
  EXPECT_LE(rep.max_g, 1e-8);
  EXPECT_NEAR(rep.g_near_radius, 0.0, 1e-2);
  EXPECT_NEAR(rep.limit_root, rep.limit_root_varrho, 1e-12);
  EXPECT_LT(rep.limit_root, 0.0);
  EXPECT_NEAR(rep.g_far, rep.limit_root, 1e-6);
  EXPECT_LT(rep.escape_sum, 1.0);
  EXPECT_NEAR(m.hypothesis_gauge(m.lnR() - 1e-3), 0.0, 1e-2);
}

TEST(Hypothesis, RankTwoBatch) {
  for (unsigned seed = 1; seed <= 10; ++seed) {
    const RateModel m(testing_support::random_symmetric(2, seed + 100, 0.05 * (seed % 4)));
    const auto rep = m.hypothesis_one(m.default_s_grid(81));
    EXPECT_LE(rep.max_g, 1e-6);
    EXPECT_NEAR(rep.g_far, rep.limit_root, 1e-6);
  }
}
