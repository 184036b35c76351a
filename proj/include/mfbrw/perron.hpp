#pragma once

// Log Perron-Frobenius eigenvalue of the non-backtracking letter matrix
// M_ab = e^{lambda_a} 1{b != a^-1}, its gradient, its Legendre transform
// rho*(xi), and a brute-force pair-measure oracle for rho* at rank 2.
//
// With x = e^rho and nu_a = e^{lambda_a}, the right eigenvector is
// w_a = nu_a (x - nu_{a'}) / (x^2 - nu_a nu_{a'}) (a' the inverse letter),
// and x is the largest root of sum_a w_a = 1. The left eigenvector is
// w_a / nu_a, which gives the gradient in closed form.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "mfbrw/error.hpp"
#include "mfbrw/group.hpp"

namespace mfbrw {

inline constexpr double kVarrhoTol = 1e-12;
inline constexpr double kPowerTol = 1e-12;
inline constexpr double kBalanceTol = 1e-10;
inline constexpr double kBracketInset = 1e-9;

namespace detail {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline void check_weight_vector(const std::vector<double>& lambda) {
  if (lambda.size() < 4 || lambda.size() % 2 != 0) {
    throw Error(Errc::invalid_argument, "weight vector must have 2d >= 4 entries, got " +
                                            std::to_string(lambda.size()));
  }
  bool any_finite = false;
  for (double l : lambda) {
    if (std::isnan(l) || l == std::numeric_limits<double>::infinity()) {
      throw Error(Errc::invalid_argument, "weight vector entries must be finite or -inf");
    }
    any_finite = any_finite || std::isfinite(l);
  }
  if (!any_finite) throw Error(Errc::invalid_argument, "weight vector has no finite entry");
}

/// Shift by max lambda; nu_a = e^{lambda_a - shift} in [0, 1].
inline double shifted_weights(const std::vector<double>& lambda, std::vector<double>& nu) {
  const double shift = *std::max_element(lambda.begin(), lambda.end());
  nu.resize(lambda.size());
  for (std::size_t a = 0; a < lambda.size(); ++a) nu[a] = std::exp(lambda[a] - shift);
  return shift;
}

/// sum_a w_a - 1 at x, summed pairwise in cancellation-free form.
inline double eigen_residual(const std::vector<double>& nu, double x) {
  double sum = 0.0;
  for (std::size_t a = 0; a < nu.size(); a += 2) {
    const double u = nu[a];
    const double v = nu[a + 1];
    const double g = std::sqrt(u * v);
    const double su = std::sqrt(u);
    const double sv = std::sqrt(v);
    sum += (u + v) / (x + g);
    if (g > 0.0) sum += g * (su - sv) * (su - sv) / ((x - g) * (x + g));
  }
  return sum - 1.0;
}

inline double eigen_residual_dx(const std::vector<double>& nu, double x) {
  double sum = 0.0;
  for (std::size_t a = 0; a < nu.size(); a += 2) {
    const double u = nu[a];
    const double v = nu[a + 1];
    const double g = std::sqrt(u * v);
    const double su = std::sqrt(u);
    const double sv = std::sqrt(v);
    sum -= (u + v) / ((x + g) * (x + g));
    if (g > 0.0) {
      const double den = (x - g) * (x + g);
      sum -= g * (su - sv) * (su - sv) * 2.0 * x / (den * den);
    }
  }
  return sum;
}

/// Largest root x of the eigen equation for shifted weights nu (max nu = 1).
inline double perron_root(const std::vector<double>& nu) {
  double lo = 0.0;
  double total = 0.0;
  for (std::size_t a = 0; a < nu.size(); a += 2) lo = std::max(lo, std::sqrt(nu[a] * nu[a + 1]));
  for (double v : nu) total += v;
  double hi = total;
  // Pairs with nu_a = nu_{a'} contribute no pole; the residual is finite at lo.
  double x_lo = lo * (1.0 + kBracketInset);
  if (x_lo <= 0.0) x_lo = std::numeric_limits<double>::min();
  const double r_lo = eigen_residual(nu, x_lo);
  const double r_hi = eigen_residual(nu, hi);
  if (!(r_lo >= 0.0) || !(r_hi <= 0.0)) {
    // The inset may skip a root that sits within 1e-9 of the pole.
    if (r_hi <= 0.0 && lo > 0.0 && eigen_residual(nu, lo * (1.0 + 1e-15)) >= 0.0) {
      x_lo = lo * (1.0 + 1e-15);
    } else if (r_hi <= 0.0 && lo > 0.0) {
      // Reducible support: the root sits on the pole itself.
      return lo;
    } else {
      std::ostringstream msg;
      msg.precision(17);
      msg << "eigen equation bracket [" << x_lo << ", " << hi << "] does not straddle the root: residuals " << r_lo
          << " and " << r_hi;
      throw Error(Errc::bracket_failure, msg.str());
    }
  }
  double a = x_lo;
  double b = hi;
  double x = hi;
  for (int it = 0; it < 300; ++it) {
    const double f = eigen_residual(nu, x);
    if (f == 0.0) return x;
    (f > 0.0 ? a : b) = x;
    const double df = eigen_residual_dx(nu, x);
    double next = (df < 0.0) ? x - f / df : 0.5 * (a + b);
    if (!(next > a && next < b)) next = 0.5 * (a + b);
    if (std::abs(next - x) <= 4.0 * std::numeric_limits<double>::epsilon() * x) return next;
    x = next;
  }
  return x;
}

}  // namespace detail

/// varrho(lambda) = ln of the Perron root; -inf entries drop letters from the
/// support.
inline double varrho(const std::vector<double>& lambda) {
  detail::check_weight_vector(lambda);
  std::vector<double> nu;
  const double shift = detail::shifted_weights(lambda, nu);
  return shift + std::log(detail::perron_root(nu));
}

struct PowerResult {
  double value = 0.0;  // ln of the dominant eigenvalue
  double lower = 0.0;  // Collatz-Wielandt bounds on the eigenvalue (shifted scale)
  double upper = 0.0;
  long iterations = 0;
};

/// Power iteration on M with Collatz-Wielandt stopping.
inline PowerResult varrho_power(const std::vector<double>& lambda, double tol = kPowerTol,
                                long budget = 1000000) {
  detail::check_weight_vector(lambda);
  std::vector<double> nu;
  const double shift = detail::shifted_weights(lambda, nu);
  const std::size_t n = nu.size();
  std::vector<double> x(n, 1.0);
  std::vector<double> y(n);
  PowerResult out;
  for (long it = 1; it <= budget; ++it) {
    const double total = std::accumulate(x.begin(), x.end(), 0.0);
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    double norm = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      y[a] = nu[a] * (total - x[inverse(static_cast<Letter>(a))]);
      if (x[a] > 0.0) {
        lo = std::min(lo, y[a] / x[a]);
        hi = std::max(hi, y[a] / x[a]);
      }
      norm += y[a];
    }
    for (std::size_t a = 0; a < n; ++a) x[a] = y[a] / norm;
    out.lower = lo;
    out.upper = hi;
    out.iterations = it;
    if (hi - lo <= tol * lo) {
      out.value = shift + std::log(0.5 * (lo + hi));
      return out;
    }
  }
  std::ostringstream msg;
  msg.precision(17);
  msg << "power iteration did not converge in " << budget << " steps; eigenvalue bracket [" << out.lower << ", "
      << out.upper << "]";
  throw Error(Errc::non_convergent, msg.str());
}

/// d varrho / d lambda_a; lies in the simplex.
inline std::vector<double> varrho_gradient(const std::vector<double>& lambda) {
  detail::check_weight_vector(lambda);
  std::vector<double> nu;
  detail::shifted_weights(lambda, nu);
  const double x = detail::perron_root(nu);
  std::vector<double> g(nu.size());
  double total = 0.0;
  for (std::size_t a = 0; a < nu.size(); ++a) {
    const double v = nu[inverse(static_cast<Letter>(a))];
    const double num = x - v;
    const double den = x * x - nu[a] * v;
    g[a] = nu[a] * num * num / (den * den);
    total += g[a];
  }
  for (double& v : g) v /= total;
  return g;
}

struct RhoStarResult {
  double value = 0.0;
  std::vector<double> lambda;  // maximizer, -inf off the support of xi
  double gradient_gap = 0.0;   // max |grad varrho(lambda) - xi| on the support
  int iterations = 0;
  bool boundary = false;  // xi has zero components
};

namespace detail {

inline void check_simplex_point(const std::vector<double>& xi, double tol = 1e-9) {
  double total = 0.0;
  for (double v : xi) {
    if (!(v >= -tol) || !std::isfinite(v)) throw Error(Errc::invalid_argument, "simplex point has a negative entry");
    total += v;
  }
  if (std::abs(total - 1.0) > tol) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "simplex point must sum to 1, sums to " << total;
    throw Error(Errc::invalid_argument, msg.str());
  }
}

}  // namespace detail

/// rho*(xi) = sup_lambda {<xi, lambda> - varrho(lambda)} + ln(2d - 1).
/// Damped Newton on the support of xi; components with xi_a = 0 are sent to
/// lambda_a = -inf where the supremum is approached.
inline RhoStarResult rho_star(const std::vector<double>& xi, double tol = 1e-10, int budget = 10000) {
  detail::check_simplex_point(xi);
  const std::size_t n = xi.size();
  if (n < 4 || n % 2 != 0) throw Error(Errc::invalid_argument, "simplex point must have 2d >= 4 entries");
  const double log_branch = std::log(static_cast<double>(n) - 1.0);
  std::vector<int> support;
  for (std::size_t a = 0; a < n; ++a) {
    if (xi[a] > 0.0) support.push_back(static_cast<int>(a));
  }
  const int k = static_cast<int>(support.size());
  RhoStarResult out;
  out.boundary = k < static_cast<int>(n);

  std::vector<double> lambda(n, detail::kNegInf);
  auto embed = [&](const Eigen::VectorXd& z) {
    for (int i = 0; i < k; ++i) lambda[support[i]] = z(i);
    return lambda;
  };
  auto objective = [&](const Eigen::VectorXd& z) {
    double dot = 0.0;
    for (int i = 0; i < k; ++i) dot += xi[support[i]] * z(i);
    return dot - varrho(embed(z));
  };
  auto gap = [&](const Eigen::VectorXd& z) {
    const auto g = varrho_gradient(embed(z));
    Eigen::VectorXd out_gap(k);
    for (int i = 0; i < k; ++i) out_gap(i) = xi[support[i]] - g[support[i]];
    return out_gap;
  };

  Eigen::VectorXd z = Eigen::VectorXd::Zero(k);
  double f = objective(z);
  Eigen::VectorXd grad = gap(z);
  int it = 0;
  for (; it < budget && grad.lpNorm<Eigen::Infinity>() >= tol; ++it) {
    // Hessian of varrho by differencing the analytic gradient; the 11^T term
    // fixes the translation gauge.
    Eigen::MatrixXd H(k, k);
    const double h = 1e-6;
    for (int j = 0; j < k; ++j) {
      Eigen::VectorXd zp = z;
      Eigen::VectorXd zm = z;
      zp(j) += h;
      zm(j) -= h;
      H.col(j) = (gap(zm) - gap(zp)) / (2.0 * h);
    }
    H = 0.5 * (H + H.transpose()) + Eigen::MatrixXd::Constant(k, k, 1.0 / k);
    Eigen::VectorXd step = H.ldlt().solve(grad);
    if (!step.allFinite() || grad.dot(step) <= 0.0) step = grad;
    double t = 1.0;
    bool moved = false;
    for (int bt = 0; bt < 60; ++bt, t *= 0.5) {
      const Eigen::VectorXd cand = z + t * step;
      const double fc = objective(cand);
      if (fc >= f - 1e-15 * std::abs(f)) {
        const Eigen::VectorXd gc = gap(cand);
        if (fc > f || gc.lpNorm<Eigen::Infinity>() < grad.lpNorm<Eigen::Infinity>()) {
          z = cand;
          f = fc;
          grad = gc;
          moved = true;
          break;
        }
      }
    }
    if (!moved) break;
    z.array() -= z.maxCoeff();
  }
  out.iterations = it;
  out.lambda = embed(z);
  out.gradient_gap = grad.lpNorm<Eigen::Infinity>();
  out.value = f + log_branch;
  if (out.gradient_gap >= tol && !out.boundary && out.gradient_gap > 1e-7) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "rho* ascent stalled after " << it << " iterations with gradient gap " << out.gradient_gap
        << "; best value " << out.value;
    throw Error(Errc::non_convergent, msg.str());
  }
  return out;
}

struct PairMeasure {
  int rank = 2;
  // pi(a, b), row-major 2d x 2d; entries with b = a^-1 are zero.
  std::vector<double> pi;
  double value = 0.0;  // I^(2)(pi)
  int starts = 0;
  bool balanced = false;

  double at(int a, int b) const { return pi[static_cast<std::size_t>(a) * 2 * rank + b]; }
};

/// I^(2)(pi) = sum pi(a,b) ln(pi(a,b) / (pi_1(a) p(a,b))), p = 1{b != a^-1}/(2d-1).
inline double pair_rate(int rank, const std::vector<double>& pi) {
  const int n = 2 * rank;
  const double p = 1.0 / (n - 1.0);
  double value = 0.0;
  for (int a = 0; a < n; ++a) {
    double row = 0.0;
    for (int b = 0; b < n; ++b) row += pi[a * n + b];
    for (int b = 0; b < n; ++b) {
      const double v = pi[a * n + b];
      if (v <= 0.0) continue;
      if (b == inverse(static_cast<Letter>(a))) return std::numeric_limits<double>::infinity();
      value += v * std::log(v / (row * p));
    }
  }
  return value;
}

/// Balanced pair measures exist iff no set of rows needs more mass than its
/// admissible columns hold (Hall's condition for the transport polytope).
inline bool pair_polytope_feasible(const std::vector<double>& nu, double tol = 1e-12) {
  const int n = static_cast<int>(nu.size());
  for (unsigned mask = 1; mask < (1U << n); ++mask) {
    double need = 0.0;
    unsigned cols = 0;
    for (int a = 0; a < n; ++a) {
      if (!(mask & (1U << a)) || nu[a] <= 0.0) continue;
      need += nu[a];
      for (int b = 0; b < n; ++b) {
        if (b != inverse(static_cast<Letter>(a))) cols |= 1U << b;
      }
    }
    double have = 0.0;
    for (int b = 0; b < n; ++b) {
      if (cols & (1U << b)) have += nu[b];
    }
    if (need > have + tol) return false;
  }
  return true;
}

namespace detail {

/// Sinkhorn scaling of a kernel to row and column sums nu.
inline bool sinkhorn(std::vector<double>& pi, const std::vector<double>& nu, int n, int budget = 200000) {
  std::vector<double> row(n);
  std::vector<double> col(n);
  for (int it = 0; it < budget; ++it) {
    std::fill(row.begin(), row.end(), 0.0);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) row[a] += pi[a * n + b];
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) pi[a * n + b] = row[a] > 0.0 ? pi[a * n + b] * nu[a] / row[a] : 0.0;
    std::fill(col.begin(), col.end(), 0.0);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) col[b] += pi[a * n + b];
    double err = 0.0;
    for (int b = 0; b < n; ++b) err = std::max(err, std::abs(col[b] - nu[b]));
    if (err < 1e-15) return true;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) pi[a * n + b] = col[b] > 0.0 ? pi[a * n + b] * nu[b] / col[b] : 0.0;
  }
  return false;
}

}  // namespace detail

/// Minimum of I^(2) over balanced pair measures with marginal nu (rank 2 only).
/// Feasible starts come from Sinkhorn scaling of random kernels; each start
/// is polished by Newton steps projected onto the marginal constraints.
inline PairMeasure pair_measure_rate(const std::vector<double>& nu, int starts = 6, unsigned seed = 1) {
  if (nu.size() != 4) {
    throw Error(Errc::invalid_argument, "pair-measure oracle supports rank 2 only (4 letters), got " +
                                            std::to_string(nu.size()) + " letters");
  }
  detail::check_simplex_point(nu);
  if (!pair_polytope_feasible(nu)) {
    throw Error(Errc::infeasible, "no balanced pair measure has the requested marginal");
  }
  const int n = 4;
  const double log_branch = std::log(3.0);
  double entropy_nu = 0.0;
  for (double v : nu) {
    if (v > 0.0) entropy_nu += v * std::log(v);
  }
  // Free variables: admissible pairs with both marginals positive.
  std::vector<int> vars;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      if (b != inverse(static_cast<Letter>(a)) && nu[a] > 0.0 && nu[b] > 0.0) vars.push_back(a * n + b);
  const int m = static_cast<int>(vars.size());
  // Constraints: row sums for all rows, column sums for all but the last
  // positive column (the dropped one is implied).
  std::vector<std::vector<double>> rows;
  std::vector<double> rhs;
  int last_col = -1;
  for (int b = 0; b < n; ++b)
    if (nu[b] > 0.0) last_col = b;
  for (int a = 0; a < n; ++a) {
    if (nu[a] <= 0.0) continue;
    std::vector<double> r(m, 0.0);
    for (int j = 0; j < m; ++j) r[j] = (vars[j] / n == a) ? 1.0 : 0.0;
    rows.push_back(r);
    rhs.push_back(nu[a]);
  }
  for (int b = 0; b < n; ++b) {
    if (nu[b] <= 0.0 || b == last_col) continue;
    std::vector<double> r(m, 0.0);
    for (int j = 0; j < m; ++j) r[j] = (vars[j] % n == b) ? 1.0 : 0.0;
    rows.push_back(r);
    rhs.push_back(nu[b]);
  }
  const int c = static_cast<int>(rows.size());
  Eigen::MatrixXd A(c, m);
  for (int i = 0; i < c; ++i)
    for (int j = 0; j < m; ++j) A(i, j) = rows[i][j];

  auto total_rate = [&](const Eigen::VectorXd& x) {
    double s = 0.0;
    for (int j = 0; j < m; ++j) {
      if (x(j) > 0.0) s += x(j) * std::log(x(j));
    }
    return s - entropy_nu + log_branch;
  };

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  PairMeasure best;
  best.rank = 2;
  best.value = std::numeric_limits<double>::infinity();
  for (int s = 0; s < starts; ++s) {
    std::vector<double> kernel(n * n, 0.0);
    for (int j = 0; j < m; ++j) kernel[vars[j]] = (s == 0) ? 1.0 : u(rng);
    detail::sinkhorn(kernel, nu, n);
    Eigen::VectorXd x(m);
    for (int j = 0; j < m; ++j) x(j) = kernel[vars[j]];
    double f = total_rate(x);
    for (int it = 0; it < 200; ++it) {
      // Newton step for min sum x ln x on {Ax = b}: KKT system with H = diag(1/x).
      Eigen::VectorXd g(m);
      Eigen::VectorXd hinv(m);
      for (int j = 0; j < m; ++j) {
        const double xj = std::max(x(j), 1e-300);
        g(j) = std::log(xj) + 1.0;
        hinv(j) = xj;
      }
      // Solve (A H^-1 A^T) w = A H^-1 g; step = -H^-1 (g - A^T w).
      const Eigen::MatrixXd AH = A * hinv.asDiagonal();
      const Eigen::MatrixXd S = AH * A.transpose();
      const Eigen::VectorXd w = S.completeOrthogonalDecomposition().solve(AH * g);
      const Eigen::VectorXd step = -(hinv.asDiagonal() * (g - A.transpose() * w));
      const double decrement = -g.dot(step);
      if (!(decrement > 1e-30)) break;
      double t = 1.0;
      for (int j = 0; j < m; ++j) {
        if (step(j) < 0.0) t = std::min(t, -0.99 * x(j) / step(j));
      }
      bool moved = false;
      for (int bt = 0; bt < 60; ++bt, t *= 0.5) {
        const Eigen::VectorXd cand = x + t * step;
        const double fc = total_rate(cand);
        if (fc <= f) {
          moved = fc < f;
          x = cand;
          f = fc;
          break;
        }
      }
      if (!moved || decrement < 1e-28) break;
    }
    if (f < best.value) {
      best.value = f;
      best.pi.assign(n * n, 0.0);
      for (int j = 0; j < m; ++j) best.pi[vars[j]] = std::max(x(j), 0.0);
    }
    ++best.starts;
  }
  double worst = 0.0;
  for (int a = 0; a < n; ++a) {
    double row = 0.0;
    double col = 0.0;
    for (int b = 0; b < n; ++b) {
      row += best.at(a, b);
      col += best.at(b, a);
    }
    worst = std::max(worst, std::abs(row - col));
  }
  best.balanced = worst <= kBalanceTol;
  return best;
}

}  // namespace mfbrw
