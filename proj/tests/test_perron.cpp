#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mfbrw/first_passage.hpp"
#include "mfbrw/perron.hpp"
#include "test_support.hpp"

using namespace mfbrw;

namespace {

std::vector<double> random_lambda(std::mt19937_64& rng, int n, double lo = -2.0, double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> l(n);
  for (auto& x : l) x = u(rng);
  return l;
}

std::vector<double> random_interior(std::mt19937_64& rng, int n, double floor = 0.05) {
  std::uniform_real_distribution<double> u(floor, 1.0);
  std::vector<double> x(n);
  double t = 0.0;
  for (auto& v : x) t += (v = u(rng));
  for (auto& v : x) v /= t;
  return x;
}

}  // namespace

TEST(Varrho, ZeroAndShift) {
  for (int d = 2; d <= 5; ++d) {
    std::vector<double> z(2 * d, 0.0);
    EXPECT_NEAR(varrho(z), std::log(2.0 * d - 1.0), 1e-14);
    EXPECT_NEAR(varrho_power(z).value, std::log(2.0 * d - 1.0), 1e-12);
  }
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    auto l = random_lambda(rng, 4);
    const double base = varrho(l);
    const double c = std::uniform_real_distribution<double>(-5, 5)(rng);
    for (auto& x : l) x += c;
    EXPECT_NEAR(varrho(l), base + c, 1e-10);
  }
}

TEST(Varrho, PinnedRankTwoConstant) {
  // lambda = (1, 1, 0, 0): rho = [(1 + e) + sqrt((1 + e)^2 + 12 e)] / 2.
  const double e = std::exp(1.0);
  const double expected = std::log(0.5 * ((1 + e) + std::sqrt((1 + e) * (1 + e) + 12 * e)));
  const std::vector<double> l{1, 1, 0, 0};
  EXPECT_NEAR(varrho(l), expected, 1e-14);
  EXPECT_NEAR(varrho_power(l).value, expected, 1e-11);
  EXPECT_NEAR(varrho(l), 1.661398171550093, 1e-13);
}

TEST(Varrho, MatchesPowerIteration) {
  std::mt19937_64 rng(2);
  for (int d = 2; d <= 4; ++d) {
    for (int i = 0; i < 100; ++i) {
      const auto l = random_lambda(rng, 2 * d);
      const auto p = varrho_power(l);
      EXPECT_NEAR(varrho(l), p.value, 1e-8);
      EXPECT_LE(p.upper - p.lower, 1e-12 * p.lower);
    }
  }
}

TEST(Varrho, ExtremeWeights) {
  const std::vector<double> l{700, -700, 0, 0, 350, 350};
  const double v = varrho(l);
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(v, varrho_power(l).value, 1e-8);
}

TEST(Varrho, Convexity) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto a = random_lambda(rng, 6, -3, 3);
    const auto b = random_lambda(rng, 6, -3, 3);
    std::vector<double> m(6);
    for (int j = 0; j < 6; ++j) m[j] = 0.5 * (a[j] + b[j]);
    EXPECT_LE(varrho(m), 0.5 * varrho(a) + 0.5 * varrho(b) + 1e-10);
  }
}

TEST(Varrho, CriticalIdentity) {
  for (unsigned seed = 1; seed <= 10; ++seed) {
    const Walk walk(testing_support::random_symmetric(2, seed, (seed % 3) * 0.1));
    auto l = walk.psi(walk.lnR()).values;
    for (auto& x : l) x *= 2.0;
    EXPECT_NEAR(varrho(l), 0.0, 1e-10);
  }
}

TEST(Gradient, SimplexAndFiniteDifferences) {
  std::vector<double> z(4, 0.0);
  for (double g : varrho_gradient(z)) EXPECT_NEAR(g, 0.25, 1e-15);
  std::mt19937_64 rng(4);
  for (int i = 0; i < 20; ++i) {
    const auto l = random_lambda(rng, 6);
    const auto g = varrho_gradient(l);
    double s = 0.0;
    for (std::size_t a = 0; a < l.size(); ++a) {
      s += g[a];
      EXPECT_GT(g[a], 0.0);
      auto p = l;
      auto m = l;
      p[a] += 1e-5;
      m[a] -= 1e-5;
      EXPECT_NEAR(g[a], (varrho(p) - varrho(m)) / 2e-5, 1e-6);
    }
    EXPECT_NEAR(s, 1.0, 1e-14);
  }
}

TEST(RhoStar, UniformAndNonnegative) {
  EXPECT_NEAR(rho_star({0.25, 0.25, 0.25, 0.25}).value, 0.0, 1e-12);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 30; ++i) {
    const auto xi = random_interior(rng, 6);
    const auto r = rho_star(xi);
    EXPECT_GE(r.value, -1e-12);
    const auto g = varrho_gradient(r.lambda);
    for (std::size_t a = 0; a < xi.size(); ++a) EXPECT_NEAR(g[a], xi[a], 1e-9);
  }
}

TEST(RhoStar, BoundaryPoints) {
  // A single letter: only a^n, rate ln(2d - 1).
  const auto one = rho_star({1, 0, 0, 0});
  EXPECT_TRUE(one.boundary);
  EXPECT_NEAR(one.value, std::log(3.0), 1e-10);
  const auto two = rho_star({0.5, 0, 0.5, 0});
  EXPECT_TRUE(two.boundary);
  // Words over {a, b} only: 2^n of the 4*3^(n-1) words.
  EXPECT_NEAR(two.value, std::log(3.0) - std::log(2.0), 1e-9);
  const auto pm = pair_measure_rate({0.5, 0, 0.5, 0});
  EXPECT_NEAR(pm.value, two.value, 1e-8);
}

TEST(PairMeasure, UniformZeroAndNonnegative) {
  const auto u = pair_measure_rate({0.25, 0.25, 0.25, 0.25});
  EXPECT_NEAR(u.value, 0.0, 1e-12);
  EXPECT_TRUE(u.balanced);
  std::vector<double> stat(16, 0.0);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      if (b != (a ^ 1)) stat[a * 4 + b] = 0.25 / 3.0;
  EXPECT_NEAR(pair_rate(2, stat), 0.0, 1e-15);
  std::mt19937_64 rng(6);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> pi(16, 0.0);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        if (b != (a ^ 1)) pi[a * 4 + b] = std::uniform_real_distribution<double>(0.01, 1)(rng);
    double t = 0;
    for (double v : pi) t += v;
    for (double& v : pi) v /= t;
    EXPECT_GE(pair_rate(2, pi), 0.0);
  }
}

TEST(PairMeasure, MatchesRhoStar) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 10; ++i) {
    const auto nu = random_interior(rng, 4);
    const auto pm = pair_measure_rate(nu);
    EXPECT_TRUE(pm.balanced);
    EXPECT_NEAR(pm.value, rho_star(nu).value, 1e-7);
  }
  // Symmetric 5 x 5 grid.
  for (int i = 1; i <= 5; ++i) {
    const double x = 0.5 * i / 6.0;
    const std::vector<double> nu{x, x, 0.5 - x, 0.5 - x};
    EXPECT_NEAR(pair_measure_rate(nu).value, rho_star(nu).value, 1e-7);
  }
}

TEST(PairMeasure, DegenerateMarginalAndRankRefusal) {
  // Only a and a^-1: the balanced measure must put all mass on (a,a), (A,A).
  EXPECT_TRUE(pair_polytope_feasible({0.5, 0.5, 0, 0}));
  const auto pm = pair_measure_rate({0.5, 0.5, 0, 0});
  EXPECT_NEAR(pm.value, std::log(3.0), 1e-12);
  EXPECT_NEAR(rho_star({0.5, 0.5, 0, 0}).value, std::log(3.0), 1e-10);
  EXPECT_THROW(pair_measure_rate(std::vector<double>(6, 1.0 / 6)), Error);
}

TEST(RhoStar, FenchelRoundTrip) {
  // max over a simplex grid of <xi, lambda> - rho*(xi) + ln 3 recovers varrho.
  const std::vector<double> l{0.3, -0.2, 0.5, 0.1};
  const int N = 24;
  double best = -1e300;
  for (int i = 0; i <= N; ++i)
    for (int j = 0; i + j <= N; ++j)
      for (int k = 0; i + j + k <= N; ++k) {
        const int m = N - i - j - k;
        const std::vector<double> xi{double(i) / N, double(j) / N, double(k) / N, double(m) / N};
        if (!pair_polytope_feasible(xi)) continue;
        double dot = 0;
        for (int a = 0; a < 4; ++a) dot += xi[a] * l[a];
        best = std::max(best, dot - rho_star(xi).value + std::log(3.0));
      }
  const double v = varrho(l);
  EXPECT_LE(best, v + 1e-9);
  EXPECT_NEAR(best, v, 1e-3);
}
