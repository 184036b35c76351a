#pragma once

// Multifractal outputs for the BRW limit set: the speed window
// I(r) = {q : L*(q) <= ln r}, the dimension of the tree-boundary sets E_r,
// the dimension of the limit-set slices Lambda_r(alpha, beta), and the
// maximizing speed alpha(r) with dim_H Lambda_r.
//
// On the rate curve q(s) = 1/P'(s), L*(q(s)) = s - q P(s), so
//   (ln r - L*(q)) / q = (ln r - s) P'(s) + P(s),
// which is stationary at s = ln r. The three routes to dim_H Lambda_r are a
// direct maximization over q, P(ln r), and the root D of
// sum_a F_a(r) / (e^D + F_a(r)) = 1.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <vector>

#include "mfbrw/error.hpp"
#include "mfbrw/parallel.hpp"
#include "mfbrw/rates.hpp"
#include "mfbrw/solve.hpp"

namespace mfbrw {

inline constexpr double kDimTol = 1e-6;
inline constexpr double kGoldenWidth = 1e-10;
inline constexpr double kPhaseSlack = 1e-9;
inline constexpr double kWindowSlack = 1e-12;

struct SpeedWindow {
  double r = 0.0;
  double lower = 0.0;  // I_-(r)
  double upper = 0.0;  // I_+(r)
  bool contains(double q, double slack = kWindowSlack) const { return q >= lower - slack && q <= upper + slack; }
};

struct DimInterval {
  double lower = 0.0;
  double upper = 0.0;          // equals lower when exact
  double general_upper = 0.0;  // (ln r - L*(alpha)) / alpha, always reported
  bool exact = false;
};

struct AlphaStar {
  double r = 0.0;
  double alpha = 0.0;       // maximizer of (ln r - L*(q)) / q
  double dim = 0.0;         // P(ln r)
  double dim_golden = 0.0;  // direct maximization
  double dim_fixed_point = 0.0;
  double tangency = 0.0;    // ln r - L*(alpha) - alpha P(s(alpha))
};

struct SpectrumTable {
  double r = 0.0;
  bool isotropic = false;
  bool hypothesis_certified = false;
  SpeedWindow window;
  std::vector<double> alpha;
  std::vector<double> beta;
  std::vector<double> dimE;
  std::vector<double> dimLambda_point;  // at alpha
  std::vector<double> dimLambda_lower;
  std::vector<double> dimLambda_upper;
  std::vector<bool> exact;
};

class Spectra {
 public:
  explicit Spectra(RateModel model) : model_(std::make_shared<const RateModel>(std::move(model))) {}
  explicit Spectra(const StepDistribution& mu) : Spectra(RateModel(mu)) {}

  const RateModel& model() const noexcept { return *model_; }

  /// I(r) for 1 < r <= R. Requests slightly above R (relative 1e-9) are
  /// treated as r = R.
  SpeedWindow speed_window(double r) const {
    check_phase(r);
    return window(std::min(r, model_->R()));
  }

  /// dim_H E_r(alpha, beta) = ln r - max(L*(alpha), L*(beta)); valid for any r > 1.
  double dim_E(double r, double alpha, double beta) const {
    if (!(r > 1.0)) throw Error(Errc::out_of_phase, "dim E_r needs r > 1, got " + num(r));
    check_order(alpha, beta);
    const auto w = window(r);
    require_inside(w, alpha, beta);
    const double v = std::log(r) - std::max(model_->rate_L(alpha), model_->rate_L(beta));
    return std::max(v, 0.0);
  }

  /// dim_H Lambda_r(alpha) = (ln r - L*(alpha)) / alpha, and P(ln R) at (R, 0).
  double dim_Lambda_point(double r, double alpha) const {
    const auto w = speed_window(r);
    require_inside(w, alpha, alpha);
    return point(r, alpha);
  }

  DimInterval dim_Lambda_interval(double r, double alpha, double beta) const {
    check_order(alpha, beta);
    const auto w = speed_window(r);
    require_inside(w, alpha, beta);
    return interval(r, alpha, beta);
  }

  /// alpha(r) and dim_H Lambda_r, cross-checked three ways.
  AlphaStar alpha_star(double r, double tol = kDimTol) const {
    const auto w = speed_window(r);
    const RateModel& m = *model_;
    const double c = m.escape_rate();
    const double lr = std::log(r);
    const bool critical = at_radius(r);
    AlphaStar out;
    out.r = r;

    auto objective = [&](double q) {
      if (q <= 0.0) return m.pressure_below(0.0);  // limit -(L*)'(0) at r = R
      const auto pt = m.rate_L_legendre(q);
      return (lr - pt.value) / q;
    };
    const double lo = critical ? 0.0 : w.lower;
    const auto best = detail::golden_max(objective, lo, c, kGoldenWidth);
    out.dim_golden = best.second;

    if (critical) {
      out.alpha = 0.0;
      out.dim = m.pressure_below(0.0);
      out.tangency = 0.0;
    } else {
      const double u = m.lnR() - lr;
      out.alpha = 1.0 / m.pressure_prime_below(u);
      out.dim = m.pressure_below(u);
      const auto pt = m.rate_L_legendre(out.alpha);
      out.tangency = lr - pt.value + out.alpha * pt.slope;
    }
    out.dim_fixed_point = fixed_point_dimension(r);

    const double spread = std::max({out.dim, out.dim_golden, out.dim_fixed_point}) -
                          std::min({out.dim, out.dim_golden, out.dim_fixed_point});
    if (!(spread <= tol)) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "dim_H Lambda_r at r = " << r << ": maximization " << out.dim_golden << ", P(ln r) " << out.dim
          << ", fixed point " << out.dim_fixed_point << " (spread " << spread << " > " << tol << ")";
      throw Error(Errc::dim_mismatch, msg.str());
    }
    return out;
  }

  /// Root D of sum_a F_a(r) / (e^D + F_a(r)) = 1 by bisection.
  double fixed_point_dimension(double r) const {
    check_phase(r);
    const auto F = model_->walk().first_passage(std::min(r, model_->R())).values;
    auto f = [&](double D) {
      double s = 0.0;
      for (double v : F) s += v / (std::exp(D) + v);
      return s - 1.0;
    };
    double lo = std::log(*std::min_element(F.begin(), F.end())) - 1.0;
    double hi = std::log(std::accumulate(F.begin(), F.end(), 0.0));
    while (f(lo) < 0.0) lo -= 1.0;
    for (int i = 0; i < 200 && hi - lo > 4e-16 * std::max(1.0, std::abs(lo)); ++i) {
      const double mid = 0.5 * (lo + hi);
      (f(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

  /// True when Hypothesis I holds on the default grid (max g <= 0), or mu is isotropic.
  bool interval_formula_exact() const {
    if (model_->mu().is_isotropic()) return true;
    std::call_once(cert_->once, [&] { cert_->max_g = model_->hypothesis_one(model_->default_s_grid()).max_g; });
    return cert_->max_g <= 0.0;
  }

  /// Table over all pairs alpha <= beta drawn from `points` equally spaced
  /// speeds spanning I(r).
  SpectrumTable spectrum_table(double r, int points, int threads = 1) const {
    if (points < 1) throw Error(Errc::invalid_argument, "spectrum grid needs at least one point");
    SpectrumTable t;
    t.r = r;
    t.window = speed_window(r);
    t.isotropic = model_->mu().is_isotropic();
    t.hypothesis_certified = interval_formula_exact();
    std::vector<double> grid(points);
    for (int i = 0; i < points; ++i) {
      grid[i] = points == 1 ? t.window.lower
                            : t.window.lower + (t.window.upper - t.window.lower) * i / (points - 1.0);
    }
    // alpha = 0 only makes sense at the critical radius.
    if (grid.front() == 0.0 && !at_radius(r)) grid.erase(grid.begin());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      for (std::size_t j = i; j < grid.size(); ++j) {
        t.alpha.push_back(grid[i]);
        t.beta.push_back(grid[j]);
      }
    }
    const std::size_t n = t.alpha.size();
    t.dimE.resize(n);
    t.dimLambda_point.resize(n);
    t.dimLambda_lower.resize(n);
    t.dimLambda_upper.resize(n);
    std::vector<char> exact(n);
    parallel_for(n, threads, [&](std::size_t k) {
      const double lr = std::log(r);
      t.dimE[k] = std::max(0.0, lr - std::max(model_->rate_L(t.alpha[k]), model_->rate_L(t.beta[k])));
      const auto iv = interval(r, t.alpha[k], t.beta[k], t.hypothesis_certified);
      t.dimLambda_point[k] = iv.general_upper;
      t.dimLambda_lower[k] = iv.lower;
      t.dimLambda_upper[k] = iv.upper;
      exact[k] = iv.exact;
    });
    t.exact.assign(exact.begin(), exact.end());
    return t;
  }

 private:
  struct Certificate {
    std::once_flag once;
    double max_g = 0.0;
  };

  std::shared_ptr<const RateModel> model_;
  std::shared_ptr<Certificate> cert_ = std::make_shared<Certificate>();

  static std::string num(double x) {
    std::ostringstream s;
    s.precision(17);
    s << x;
    return s.str();
  }

  bool at_radius(double r) const { return r >= model_->R(); }

  void check_phase(double r) const {
    const double R = model_->R();
    if (!(r > 1.0) || !(r <= R * (1.0 + kPhaseSlack))) {
      throw Error(Errc::out_of_phase, "r = " + num(r) + " is outside the transient phase (1, R] with R = " + num(R) +
                                          "; r <= 1 dies out and r > R is recurrent");
    }
  }

  static void check_order(double alpha, double beta) {
    if (!(alpha <= beta)) throw Error(Errc::invalid_argument, "need alpha <= beta, got " + num(alpha) + " > " + num(beta));
  }

  static void require_inside(const SpeedWindow& w, double alpha, double beta) {
    if (!w.contains(alpha) || !w.contains(beta)) {
      throw Error(Errc::empty_set, "[" + num(alpha) + ", " + num(beta) + "] is not inside I(r) = [" + num(w.lower) +
                                       ", " + num(w.upper) + "]");
    }
  }

  /// Window for any r > 1; I_- = 0 once r >= R.
  SpeedWindow window(double r) const {
    const RateModel& m = *model_;
    const double lr = std::log(r);
    SpeedWindow w;
    w.r = r;
    // Lower end: s in [0, ln R), i.e. offset u in (0, ln R].
    if (r >= m.R()) {
      w.lower = 0.0;
    } else {
      auto f = [&](double lu) { return m.rate_curve_at(std::exp(lu)).second - lr; };
      const double a = std::log(kOffsetMin);
      const double b = std::log(m.lnR());
      const double fa = f(a);
      w.lower = fa <= 0.0 ? 0.0 : m.rate_curve_at(std::exp(detail::bracketed_root(f, a, b, fa, f(b)))).first;
    }
    // Upper end: s in [-S_max, 0].
    if (m.rate_L(1.0) <= lr) {
      w.upper = 1.0;
    } else {
      auto f = [&](double lu) { return m.rate_curve_at(std::exp(lu)).second - lr; };
      const double a = std::log(m.lnR());
      const double b = std::log(m.lnR() + kSMax);
      const double fb = f(b);
      // Beyond S_max the curve sits within e^{-S_max} of q = 1.
      w.upper = fb <= 0.0 ? m.rate_curve_at(std::exp(b)).first
                          : m.rate_curve_at(std::exp(detail::bracketed_root(f, a, b, f(a), fb))).first;
    }
    return w;
  }

  double point(double r, double alpha) const {
    if (alpha <= 0.0) {
      if (!at_radius(r)) {
        throw Error(Errc::zero_speed_off_critical,
                    "speed 0 has a limit-set dimension only at r = R = " + num(model_->R()) + ", got r = " + num(r));
      }
      return model_->pressure_below(0.0);
    }
    return std::max(0.0, (std::log(r) - model_->rate_L(alpha)) / alpha);
  }

  DimInterval interval(double r, double alpha, double beta, std::optional<bool> certified = std::nullopt) const {
    DimInterval d;
    const double pa = point(r, alpha);
    d.lower = alpha == beta ? pa : std::min(pa, point(r, beta));
    d.general_upper = pa;
    d.exact = alpha == beta || (certified ? *certified : interval_formula_exact());
    d.upper = d.exact ? d.lower : pa;
    return d;
  }
};

}  // namespace mfbrw
