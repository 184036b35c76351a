#pragma once

// First-passage generating functions F_a(r) of a nearest-neighbour walk on
// the free group, the radius of convergence R, and psi_a(s) = ln F_a(e^s).
//
// The system F_a = r mu(a) + r mu(e) F_a + r sum_{b != a} mu(b) F_{b^-1} F_a
// collapses to one scalar unknown. With S = sum_b mu(b) F_b and
// t = 1 - r mu(e) - r S, every component solves r mu(a) F^2 + t F - r mu(a) = 0,
// so F_a = F(t; c_a) with c_a = r mu(a), and t is a root of
//
//   h(t) = t - 1 + r mu(e) + r sum_a mu(a) F(t; c_a).
//
// h is convex in t with h(1) > 0, so the minimal solution F corresponds to
// the largest root of h. The walk is at its radius R exactly when the
// minimum of h touches zero.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "mfbrw/error.hpp"
#include "mfbrw/group.hpp"

namespace mfbrw {

inline constexpr double kFixedPointTol = 1e-14;
inline constexpr long kFixedPointBudget = 1000000;
inline constexpr double kDivergenceMargin = 1e-6;
inline constexpr double kRadiusTol = 1e-10;
inline constexpr double kEdgeGuard = 1e-6;
inline constexpr double kPsiStep = 1e-6;

struct FirstPassageVector {
  double r = 0.0;
  std::vector<double> values;  // F_a(r), indexed by letter
  double t = 0.0;              // scalar reduction variable
  bool tangent = false;        // r sits at the radius (double root)
  long iterations = 0;
  double residual = 0.0;       // max_a |F_a - Phi_a(F)|
};

struct PsiVector {
  double s = 0.0;
  std::vector<double> values;
  std::vector<double> derivative;  // empty unless requested
};

struct SpectralRadius {
  double R = 0.0;
  double lnR = 0.0;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  int iterations = 0;
};

namespace detail {

/// F(t; c), the smaller positive root of c F^2 + t F - c = 0 for t >= 0.
inline double quad_root(double t, double c) {
  const double disc = std::sqrt(t * t + 4.0 * c * c);
  if (t >= 0.0) return 2.0 * c / (t + disc);
  return (disc - t) / (2.0 * c);
}

class ScalarReduction {
 public:
  ScalarReduction(const StepDistribution& mu, double r) : mu_(mu), r_(r) {
    c_.resize(mu.weights().size());
    for (std::size_t a = 0; a < c_.size(); ++a) c_[a] = r * mu.weights()[a];
  }

  double h(double t) const {
    double sum = 0.0;
    for (std::size_t a = 0; a < c_.size(); ++a) sum += c_[a] * quad_root(t, c_[a]);
    return t - 1.0 + r_ * mu_.identity_weight() + sum;
  }

  double h_prime(double t) const {
    double sum = 0.0;
    for (double c : c_) sum += c * quad_root(t, c) / std::sqrt(t * t + 4.0 * c * c);
    return 1.0 - sum;
  }

  /// Minimizer of h on [0, 1].
  double argmin() const {
    if (h_prime(1.0) <= 0.0) return 1.0;
    double lo = 0.0;
    double hi = 1.0;
    for (int it = 0; it < 2000 && hi - lo > 2.0 * std::numeric_limits<double>::epsilon() * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      (h_prime(mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

  double value_tolerance() const { return 8.0 * std::numeric_limits<double>::epsilon() * (1.0 + r_); }

  /// Largest root of h in [lo, 1] given h(lo) < 0 < h(1).
  double largest_root(double lo, int& iterations) const {
    double hi = 1.0;
    double t = 1.0;
    for (iterations = 0; iterations < 500; ++iterations) {
      const double v = h(t);
      if (v == 0.0) return t;
      (v > 0.0 ? hi : lo) = t;
      const double d = h_prime(t);
      double next = (d > 0.0) ? t - v / d : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - t) <= 2.0 * std::numeric_limits<double>::epsilon() * std::abs(t) || hi - lo <= 0.0) {
        return next;
      }
      t = next;
    }
    return t;
  }

  std::vector<double> components(double t) const {
    std::vector<double> F(c_.size());
    for (std::size_t a = 0; a < c_.size(); ++a) F[a] = quad_root(t, c_[a]);
    return F;
  }

  double r() const { return r_; }

 private:
  const StepDistribution& mu_;
  double r_;
  std::vector<double> c_;
};

/// Phi(F) of the first-step decomposition.
inline std::vector<double> phi_map(const StepDistribution& mu, double r, const std::vector<double>& F) {
  const auto& w = mu.weights();
  double S = 0.0;
  for (std::size_t b = 0; b < w.size(); ++b) S += w[b] * F[inverse(static_cast<Letter>(b))];
  std::vector<double> out(F.size());
  for (std::size_t a = 0; a < F.size(); ++a) {
    // sum over b != a of mu(b) F_{b^-1}
    const double others = S - w[a] * F[inverse(static_cast<Letter>(a))];
    out[a] = r * w[a] + r * mu.identity_weight() * F[a] + r * others * F[a];
  }
  return out;
}

inline double fixed_point_residual(const StepDistribution& mu, double r, const std::vector<double>& F) {
  const auto img = phi_map(mu, r, F);
  double res = 0.0;
  for (std::size_t a = 0; a < F.size(); ++a) res = std::max(res, std::abs(img[a] - F[a]));
  return res;
}

}  // namespace detail

/// Minimal nonnegative solution of the first-passage system at radius r.
inline FirstPassageVector solve_first_passage(const StepDistribution& mu, double r) {
  if (!(r > 0.0) || !std::isfinite(r)) {
    throw Error(Errc::invalid_argument, "radius r must be positive and finite, got " + std::to_string(r));
  }
  const detail::ScalarReduction sys(mu, r);
  FirstPassageVector out;
  out.r = r;
  const double tstar = sys.argmin();
  const double m = sys.h(tstar);
  const double tol = sys.value_tolerance();
  if (m > tol) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "first-passage system has no finite solution at r = " << r << " (min residual " << m
        << " > 0; r exceeds the radius of convergence)";
    throw Error(Errc::no_finite_solution, msg.str());
  }
  int iterations = 0;
  if (m >= -tol) {
    out.t = tstar;
    out.tangent = true;
  } else {
    out.t = sys.largest_root(tstar, iterations);
  }
  out.iterations = iterations;
  out.values = sys.components(out.t);
  out.residual = detail::fixed_point_residual(mu, r, out.values);
  return out;
}

/// Plain monotone iteration F <- Phi(F) from the zero vector. Slow near R;
/// kept as an independent check of the scalar route.
inline FirstPassageVector solve_first_passage_iterative(const StepDistribution& mu, double r,
                                                        double tol = kFixedPointTol,
                                                        long budget = kFixedPointBudget) {
  if (!(r > 0.0) || !std::isfinite(r)) {
    throw Error(Errc::invalid_argument, "radius r must be positive and finite, got " + std::to_string(r));
  }
  std::vector<double> F(mu.weights().size(), 0.0);
  FirstPassageVector out;
  out.r = r;
  for (long it = 1; it <= budget; ++it) {
    auto next = detail::phi_map(mu, r, F);
    double diff = 0.0;
    for (std::size_t a = 0; a < F.size(); ++a) {
      if (next[a] < F[a] - 1e-15) {
        throw std::logic_error("monotone iteration decreased at sweep " + std::to_string(it));
      }
      if (next[a] > 1.0 + kDivergenceMargin) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "monotone iteration exceeded 1 + " << kDivergenceMargin << " at r = " << r << " after " << it
            << " sweeps";
        throw Error(Errc::no_finite_solution, msg.str());
      }
      diff = std::max(diff, next[a] - F[a]);
    }
    F = std::move(next);
    if (diff < tol) {
      out.values = F;
      out.iterations = it;
      out.residual = detail::fixed_point_residual(mu, r, F);
      return out;
    }
  }
  std::ostringstream msg;
  msg.precision(17);
  msg << "monotone iteration did not contract within " << budget << " sweeps at r = " << r;
  throw Error(Errc::no_finite_solution, msg.str());
}

/// R = sup{r : the system has a finite solution}, bisected to machine precision.
inline SpectralRadius spectral_radius(const StepDistribution& mu) {
  auto feasible = [&mu](double r) {
    const detail::ScalarReduction sys(mu, r);
    return sys.h(sys.argmin()) <= 0.0;
  };
  double lo = 1.0;
  double hi = 2.0;
  int it = 0;
  while (feasible(hi)) {
    lo = hi;
    hi *= 2.0;
    if (++it > 200) throw Error(Errc::bracket_failure, "no upper bracket for the spectral radius");
  }
  while (hi - lo > 2.0 * std::numeric_limits<double>::epsilon() * hi && it < 2000) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (feasible(mid) ? lo : hi) = mid;
    ++it;
  }
  SpectralRadius out;
  out.R = lo;
  out.lnR = std::log(lo);
  out.bracket_lo = lo;
  out.bracket_hi = hi;
  out.iterations = it;
  return out;
}

/// Walk binds a step distribution to its radius and caches F(R).
class Walk {
 public:
  explicit Walk(StepDistribution mu) : mu_(std::move(mu)), radius_(spectral_radius(mu_)) {
    at_R_ = solve_first_passage(mu_, radius_.R);
  }

  const StepDistribution& mu() const noexcept { return mu_; }
  int rank() const noexcept { return mu_.rank(); }
  int letters() const noexcept { return mu_.alphabet_size(); }
  double R() const noexcept { return radius_.R; }
  double lnR() const noexcept { return radius_.lnR; }
  const SpectralRadius& radius() const noexcept { return radius_; }
  const FirstPassageVector& at_R() const noexcept { return at_R_; }

  FirstPassageVector first_passage(double r) const {
    if (r >= radius_.R) {
      if (r <= radius_.R * (1.0 + 4.0 * std::numeric_limits<double>::epsilon())) return at_R_;
    }
    return solve_first_passage(mu_, r);
  }

  /// F_a at r = R e^{-u}, u >= 0.
  std::vector<double> first_passage_below(double u) const {
    if (u <= 0.0) return at_R_.values;
    return solve_first_passage(mu_, radius_.R * std::exp(-u)).values;
  }

  PsiVector psi(double s) const {
    check_s(s);
    PsiVector out;
    out.s = s;
    const auto F = first_passage_below(radius_.lnR - s);
    out.values.resize(F.size());
    for (std::size_t a = 0; a < F.size(); ++a) out.values[a] = std::log(F[a]);
    return out;
  }

  /// psi'(s) from the linearized fixed-point system; refuses s within
  /// `edge` of ln R where the derivative blows up.
  std::vector<double> psi_prime(double s, double edge = kEdgeGuard) const {
    check_s(s);
    const double u = radius_.lnR - s;
    if (u < edge) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "psi' requested at s = " << s << ", within " << edge << " of ln R = " << radius_.lnR;
      throw Error(Errc::near_singular, msg.str());
    }
    return psi_prime_at(radius_.R * std::exp(-u));
  }

  /// psi and psi' at s = ln R - u, for callers that track the offset u
  /// directly (keeps full relative precision in u near the radius).
  std::vector<double> psi_below(double u) const {
    auto F = first_passage_below(u);
    for (double& v : F) v = std::log(v);
    return F;
  }

  std::vector<double> psi_prime_below(double u) const {
    if (!(u > 0.0)) {
      throw Error(Errc::near_singular, "psi' is unbounded at s = ln R (offset " + std::to_string(u) + ")");
    }
    return psi_prime_at(radius_.R * std::exp(-u));
  }

  PsiVector psi_with_derivative(double s, double edge = kEdgeGuard) const {
    PsiVector out = psi(s);
    out.derivative = psi_prime(s, edge);
    return out;
  }

  /// Central difference of psi with step h; cross-check of psi_prime.
  std::vector<double> psi_prime_fd(double s, double h = kPsiStep) const {
    const auto up = psi(s + h).values;
    const auto dn = psi(s - h).values;
    std::vector<double> out(up.size());
    for (std::size_t a = 0; a < up.size(); ++a) out[a] = (up[a] - dn[a]) / (2.0 * h);
    return out;
  }

  /// F_x(r) = prod_a F_a(r)^{Xi_a(x)}.
  double f_word(double r, const ReducedWord& x) const {
    if (x.rank() != rank()) throw Error(Errc::rank_mismatch, "word rank differs from walk rank");
    const auto F = first_passage(r).values;
    double logv = 0.0;
    for (Letter a : x.letters()) logv += std::log(F[a]);
    return std::exp(logv);
  }

 private:
  void check_s(double s) const {
    if (!(s <= radius_.lnR) || !std::isfinite(s)) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "psi requires s <= ln R = " << radius_.lnR << ", got s = " << s;
      throw Error(Errc::no_finite_solution, msg.str());
    }
  }

  std::vector<double> psi_prime_at(double r) const {
    const auto F = solve_first_passage(mu_, r).values;
    const auto& w = mu_.weights();
    const double me = mu_.identity_weight();
    const int n = static_cast<int>(F.size());
    double S = 0.0;
    for (int b = 0; b < n; ++b) S += w[b] * F[inverse(static_cast<Letter>(b))];
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd rhs(n);
    for (int a = 0; a < n; ++a) {
      const int ai = inverse(static_cast<Letter>(a));
      const double others = S - w[a] * F[ai];
      for (int c = 0; c < n; ++c) {
        if (c == ai) continue;
        A(a, c) -= r * w[inverse(static_cast<Letter>(c))] * F[a];
      }
      A(a, a) -= r * me + r * others;
      rhs(a) = F[a] / r;
    }
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    const Eigen::VectorXd dF = lu.solve(rhs);
    std::vector<double> out(n);
    for (int a = 0; a < n; ++a) out[a] = r * dF(a) / F[a];
    return out;
  }

  StepDistribution mu_;
  SpectralRadius radius_;
  FirstPassageVector at_R_;
};

inline FirstPassageVector first_passage(const Walk& walk, double r) { return walk.first_passage(r); }
inline PsiVector psi(const Walk& walk, double s) { return walk.psi(s); }
inline std::vector<double> psi_prime(const Walk& walk, double s) { return walk.psi_prime(s); }
inline double f_word(const Walk& walk, double r, const ReducedWord& x) { return walk.f_word(r, x); }

}  // namespace mfbrw
