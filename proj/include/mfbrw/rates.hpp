#pragma once

// Large-deviation rate functions of the walk: Psi*(xi), the word-length rate
// L*(q) by two routes, the pressure P(s) = varrho(psi(s)), the shifted
// pressure hatP(s) = varrho(psi(s) + psi(ln R)) and the Hypothesis I gauge
//
//   g(s) = hatP(s) / P'(s) - s + ln R.
//
// Internally s is carried as the offset u = ln R - s so that points very
// close to the radius keep full relative precision.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

#include "mfbrw/error.hpp"
#include "mfbrw/first_passage.hpp"
#include "mfbrw/parallel.hpp"
#include "mfbrw/perron.hpp"
#include "mfbrw/solve.hpp"

namespace mfbrw {

inline constexpr double kSMax = 40.0;
inline constexpr double kOffsetMin = 1e-13;
inline constexpr double kRouteTol = 1e-5;
inline constexpr double kSimplexFloor = 1e-9;

struct SOfXi {
  double s = 0.0;
  double offset = 0.0;          // ln R - s
  double residual = 0.0;        // sum_a xi_a psi'_a(s) - 1
  bool saturated_low = false;   // root below ln R - S_max (s -> -inf)
  bool saturated_high = false;  // root within the offset floor of ln R
};

struct LegendrePoint {
  double q = 0.0;
  double value = 0.0;   // L*(q)
  double s = 0.0;       // maximizing s(q)
  double slope = 0.0;   // (L*)'(q) = -P(s(q))
  bool saturated = false;
};

struct MinimaxPoint {
  double q = 0.0;
  double value = 0.0;
  std::vector<double> xi;  // minimizer on the simplex
  int iterations = 0;
  int starts = 0;
};

struct RateProfile {
  std::vector<double> q;
  std::vector<double> Lstar;
  std::vector<double> dLstar;
  std::vector<double> s_of_q;
};

struct PressureCurve {
  std::vector<double> s;
  std::vector<double> P;
  std::vector<double> Pprime;
  std::vector<double> hatP;
};

struct HypothesisReport {
  std::vector<double> s;
  std::vector<double> g;
  double max_g = -std::numeric_limits<double>::infinity();
  double argmax_s = 0.0;
  double g_near_radius = 0.0;     // g at the grid point closest to ln R
  double g_far = 0.0;             // g at the most negative grid point
  double limit_root = 0.0;        // root of the s -> -inf boundary equation (bisection)
  double limit_root_varrho = 0.0; // same root through varrho
  double escape_sum = 0.0;        // sum_a mu(a) R F_a(R), below 1
};

class RateModel {
 public:
  explicit RateModel(const StepDistribution& mu) : walk_(mu) { init(); }
  explicit RateModel(Walk walk) : walk_(std::move(walk)) { init(); }

  const Walk& walk() const noexcept { return walk_; }
  const StepDistribution& mu() const noexcept { return walk_.mu(); }
  double R() const noexcept { return walk_.R(); }
  double lnR() const noexcept { return walk_.lnR(); }
  int letters() const noexcept { return walk_.letters(); }
  double log_branch() const noexcept { return std::log(letters() - 1.0); }

  /// C_RW = 1 / P'(0).
  double escape_rate() const noexcept { return c_rw_; }
  const std::vector<double>& psi_at_radius() const noexcept { return psi_R_; }

  // ---- pressure ---------------------------------------------------------

  double pressure(double s) const { return pressure_below(offset(s)); }
  double pressure_below(double u) const { return varrho(walk_.psi_below(u)); }

  double pressure_prime(double s, double edge = kEdgeGuard) const {
    guard(s, edge);
    return pressure_prime_below(lnR() - s);
  }

  double pressure_prime_below(double u) const {
    const auto psi = walk_.psi_below(u);
    const auto dpsi = walk_.psi_prime_below(u);
    const auto g = varrho_gradient(psi);
    double out = 0.0;
    for (std::size_t a = 0; a < g.size(); ++a) out += g[a] * dpsi[a];
    return out;
  }

  double hat_pressure(double s) const { return hat_pressure_below(offset(s)); }
  double hat_pressure_below(double u) const { return varrho(shifted(walk_.psi_below(u))); }

  double hat_pressure_prime(double s, double edge = kEdgeGuard) const {
    guard(s, edge);
    const double u = lnR() - s;
    const auto g = varrho_gradient(shifted(walk_.psi_below(u)));
    const auto dpsi = walk_.psi_prime_below(u);
    double out = 0.0;
    for (std::size_t a = 0; a < g.size(); ++a) out += g[a] * dpsi[a];
    return out;
  }

  /// lim_{s -> -inf} P(s) - s = varrho(ln mu).
  double pressure_lower_limit() const { return varrho_log_mu_; }

  // ---- Psi* -------------------------------------------------------------

  /// Root s(xi) of sum_a xi_a psi'_a(s) = 1 for 0 < |xi|_1 < 1.
  SOfXi s_of_xi(const std::vector<double>& xi, bool allow_saturation = true) const {
    const double norm = check_omega(xi);
    if (!(norm > 0.0 && norm < 1.0)) {
      throw Error(Errc::invalid_argument, "s(xi) needs 0 < |xi|_1 < 1, got " + std::to_string(norm));
    }
    auto resid_u = [&](double u) {
      const auto d = walk_.psi_prime_below(u);
      double v = 0.0;
      for (std::size_t a = 0; a < xi.size(); ++a) v += xi[a] * d[a];
      return v - 1.0;
    };
    SOfXi out;
    const double r_near = resid_u(kOffsetMin);
    const double r_far = resid_u(kSMax);
    if (r_near <= 0.0 || r_far >= 0.0) {
      if (!allow_saturation) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "s(xi) residual does not change sign on [ln R - " << kSMax << ", ln R - " << kOffsetMin
            << "]: residuals " << r_far << " and " << r_near;
        throw Error(Errc::root_out_of_range, msg.str());
      }
      if (r_near <= 0.0) {
        out.saturated_high = true;
        out.s = lnR();
        out.offset = 0.0;
        out.residual = r_near;
      } else {
        out.saturated_low = true;
        out.s = lnR() - kSMax;
        out.offset = kSMax;
        out.residual = r_far;
      }
      return out;
    }
    const double x = detail::bracketed_root([&](double lu) { return resid_u(std::exp(lu)); }, std::log(kOffsetMin),
                                            std::log(kSMax), r_near, r_far);
    const double u = std::exp(x);
    out.s = lnR() - u;
    out.offset = u;
    out.residual = resid_u(u);
    return out;
  }

  /// Psi*(xi) = inf_{s <= ln R} (sum_a xi_a psi_a(s) - s) on Omega.
  double psi_star(const std::vector<double>& xi) const {
    const double norm = check_omega(xi);
    if (norm == 0.0) return -lnR();
    if (std::abs(norm - 1.0) <= 1e-14) {
      double v = 0.0;
      for (std::size_t a = 0; a < xi.size(); ++a) {
        if (xi[a] > 0.0) v += xi[a] * std::log(mu().weights()[a]);
      }
      return v;
    }
    const auto root = s_of_xi(xi);
    const auto psi = walk_.psi_below(root.offset);
    double v = 0.0;
    for (std::size_t a = 0; a < xi.size(); ++a) v += xi[a] * psi[a];
    return v - root.s;
  }

  /// grad Psi*(xi) = psi(s(xi)).
  std::vector<double> psi_star_gradient(const std::vector<double>& xi) const {
    const double norm = check_omega(xi);
    if (norm == 0.0) return psi_R_;
    if (norm >= 1.0 - 1e-14) {
      std::vector<double> out(xi.size());
      for (std::size_t a = 0; a < xi.size(); ++a) out[a] = std::log(mu().weights()[a]);
      return out;
    }
    const auto root = s_of_xi(xi);
    return walk_.psi_below(root.offset);
  }

  // ---- L* through the pressure -------------------------------------------

  /// L*(q) = sup_{s <= ln R} {s - q P(s)}; stationarity P'(s) = 1/q.
  LegendrePoint rate_L_legendre(double q) const {
    if (!(q >= 0.0 && q <= 1.0)) {
      throw Error(Errc::invalid_argument, "L*(q) needs q in [0, 1], got " + std::to_string(q));
    }
    LegendrePoint out;
    out.q = q;
    if (q == 0.0) {
      out.value = lnR();
      out.s = lnR();
      out.slope = -P_R_;
      return out;
    }
    if (q == 1.0) {
      out.value = -varrho_log_mu_;
      out.s = lnR() - kSMax;
      out.slope = -pressure_below(kSMax);
      out.saturated = true;
      return out;
    }
    const double target = 1.0 / q;
    auto resid = [&](double lu) { return pressure_prime_below(std::exp(lu)) - target; };
    const double lo = std::log(kOffsetMin);
    const double hi = std::log(kSMax);
    const double r_near = resid(lo);
    const double r_far = resid(hi);
    double u;
    if (r_near <= 0.0) {
      u = 0.0;
      out.saturated = true;
    } else if (r_far >= 0.0) {
      u = kSMax;
      out.saturated = true;
    } else {
      u = std::exp(detail::bracketed_root(resid, lo, hi, r_near, r_far));
    }
    const double P = u == 0.0 ? P_R_ : pressure_below(u);
    out.s = lnR() - u;
    out.value = out.s - q * P;
    out.slope = -P;
    return out;
  }

  double rate_L(double q) const { return rate_L_legendre(q).value; }

  /// The point (q(s), L*(q(s))) on the rate curve parametrized by s < ln R.
  std::pair<double, double> rate_curve_at(double u) const {
    const double q = 1.0 / pressure_prime_below(u);
    return {q, (lnR() - u) - q * pressure_below(u)};
  }

  // ---- L* as a minimum over letter frequencies ----------------------------

  /// f(q, xi) = q [rho*(xi) - ln(2d-1)] - Psi*(q xi) and its gradient
  /// q (lambda*(xi) - psi(s(q xi))).
  double minimax_objective(double q, const std::vector<double>& xi, std::vector<double>* grad = nullptr) const {
    const auto rs = rho_star(xi);
    std::vector<double> qxi(xi.size());
    for (std::size_t a = 0; a < xi.size(); ++a) qxi[a] = q * xi[a];
    const double value = q * (rs.value - log_branch()) - psi_star(qxi);
    if (grad) {
      const auto gpsi = psi_star_gradient(qxi);
      grad->resize(xi.size());
      for (std::size_t a = 0; a < xi.size(); ++a) (*grad)[a] = q * (rs.lambda[a] - gpsi[a]);
    }
    return value;
  }

  /// min over the simplex of f(q, .) by projected gradient with
  /// Barzilai-Borwein steps, restarted from the barycentre and d random points.
  MinimaxPoint rate_L_minimax(double q, unsigned seed = 1, int random_starts = -1, int budget = 1000) const {
    if (!(q >= 0.0 && q <= 1.0)) {
      throw Error(Errc::invalid_argument, "L*(q) needs q in [0, 1], got " + std::to_string(q));
    }
    const std::size_t n = static_cast<std::size_t>(letters());
    MinimaxPoint best;
    best.q = q;
    if (q == 0.0) {
      best.value = lnR();
      best.xi.assign(n, 1.0 / n);
      return best;
    }
    const int extra = random_starts < 0 ? walk_.rank() : random_starts;
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> expo(1.0);
    best.value = std::numeric_limits<double>::infinity();
    for (int start = 0; start <= extra; ++start) {
      std::vector<double> xi(n, 1.0 / n);
      if (start > 0) {
        double t = 0.0;
        for (auto& v : xi) t += (v = expo(rng));
        for (auto& v : xi) v /= t;
        xi = detail::project_simplex(xi, kSimplexFloor);
      }
      int iters = 0;
      const double v = descend(q, xi, budget, iters);
      best.iterations += iters;
      ++best.starts;
      if (v < best.value) {
        best.value = v;
        best.xi = xi;
      }
    }
    return best;
  }

  /// Both routes; RouteMismatch when they differ by more than tol.
  double rate_L_checked(double q, double tol = kRouteTol) const {
    const double a = rate_L_legendre(q).value;
    const double b = rate_L_minimax(q).value;
    if (!(std::abs(a - b) <= tol)) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "L*(" << q << ") routes disagree: Legendre " << a << ", minimax " << b << ", |diff| "
          << std::abs(a - b) << " > " << tol;
      throw Error(Errc::route_mismatch, msg.str());
    }
    return a;
  }

  // ---- Hypothesis I -------------------------------------------------------

  double hypothesis_gauge(double s) const {
    const double u = lnR() - s;
    return hat_pressure_below(u) / pressure_prime_below(u) + u;
  }

  /// Root of sum_a m_a / (e^rho + m_a) = 1 with m_a = mu(a) R F_a(R), by
  /// bisection on rho.
  double lower_limit_root() const {
    const auto& F = walk_.at_R().values;
    std::vector<double> m(F.size());
    for (std::size_t a = 0; a < F.size(); ++a) m[a] = mu().weights()[a] * R() * F[a];
    auto f = [&](double rho) {
      double s = 0.0;
      for (double v : m) s += v / (std::exp(rho) + v);
      return s - 1.0;
    };
    double lo = std::log(*std::min_element(m.begin(), m.end())) - 1.0;
    double hi = std::log(std::accumulate(m.begin(), m.end(), 0.0));
    while (f(lo) < 0.0) lo -= 1.0;
    for (int i = 0; i < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++i) {
      const double mid = 0.5 * (lo + hi);
      (f(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

  /// Default grid: `points` offsets log-spaced from ln R - edge down to ln R - span.
  std::vector<double> default_s_grid(int points = 201, double span = kSMax, double edge = kEdgeGuard) const {
    std::vector<double> s(points);
    for (int i = 0; i < points; ++i) {
      const double t = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
      s[i] = lnR() - std::exp(std::log(span) + t * (std::log(edge) - std::log(span)));
    }
    return s;
  }

  HypothesisReport hypothesis_one(const std::vector<double>& s_grid, int threads = 1) const {
    HypothesisReport rep;
    rep.s = s_grid;
    rep.g.assign(s_grid.size(), 0.0);
    parallel_for(s_grid.size(), threads, [&](std::size_t i) { rep.g[i] = hypothesis_gauge(s_grid[i]); });
    std::size_t near = 0;
    std::size_t far = 0;
    for (std::size_t i = 0; i < s_grid.size(); ++i) {
      if (rep.g[i] > rep.max_g) {
        rep.max_g = rep.g[i];
        rep.argmax_s = s_grid[i];
      }
      if (s_grid[i] > s_grid[near]) near = i;
      if (s_grid[i] < s_grid[far]) far = i;
    }
    if (!s_grid.empty()) {
      rep.g_near_radius = rep.g[near];
      rep.g_far = rep.g[far];
    }
    rep.limit_root = lower_limit_root();
    std::vector<double> lm(letters());
    const auto& F = walk_.at_R().values;
    rep.escape_sum = 0.0;
    for (int a = 0; a < letters(); ++a) {
      const double m = mu().weights()[a] * R() * F[a];
      lm[a] = std::log(m);
      rep.escape_sum += m;
    }
    rep.limit_root_varrho = varrho(lm);
    return rep;
  }

  // ---- tables -----------------------------------------------------------

  RateProfile rate_profile(const std::vector<double>& q_grid, int threads = 1) const {
    RateProfile p;
    p.q = q_grid;
    p.Lstar.resize(q_grid.size());
    p.dLstar.resize(q_grid.size());
    p.s_of_q.resize(q_grid.size());
    parallel_for(q_grid.size(), threads, [&](std::size_t i) {
      const auto pt = rate_L_legendre(q_grid[i]);
      p.Lstar[i] = pt.value;
      p.dLstar[i] = pt.slope;
      p.s_of_q[i] = pt.s;
    });
    return p;
  }

  PressureCurve pressure_curve(const std::vector<double>& s_grid, int threads = 1) const {
    PressureCurve c;
    c.s = s_grid;
    c.P.resize(s_grid.size());
    c.Pprime.resize(s_grid.size());
    c.hatP.resize(s_grid.size());
    parallel_for(s_grid.size(), threads, [&](std::size_t i) {
      const double u = offset(s_grid[i]);
      c.P[i] = pressure_below(u);
      c.Pprime[i] = u > 0.0 ? pressure_prime_below(u) : std::numeric_limits<double>::infinity();
      c.hatP[i] = hat_pressure_below(u);
    });
    return c;
  }

 private:
  void init() {
    psi_R_ = walk_.psi_below(0.0);
    P_R_ = varrho(psi_R_);
    std::vector<double> lm(letters());
    for (int a = 0; a < letters(); ++a) lm[a] = std::log(mu().weights()[a]);
    varrho_log_mu_ = varrho(lm);
    if (!(lnR() > 0.0)) throw Error(Errc::invalid_argument, "walk is not transient (R <= 1)");
    c_rw_ = 1.0 / pressure_prime_below(lnR());
  }

  double offset(double s) const {
    if (!(s <= lnR()) || std::isnan(s)) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "s = " << s << " exceeds ln R = " << lnR();
      throw Error(Errc::no_finite_solution, msg.str());
    }
    return lnR() - s;
  }

  void guard(double s, double edge) const {
    if (offset(s) < edge) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "derivative requested at s = " << s << ", within " << edge << " of ln R";
      throw Error(Errc::near_singular, msg.str());
    }
  }

  std::vector<double> shifted(std::vector<double> psi) const {
    for (std::size_t a = 0; a < psi.size(); ++a) psi[a] += psi_R_[a];
    return psi;
  }

  double check_omega(const std::vector<double>& xi) const {
    if (static_cast<int>(xi.size()) != letters()) {
      throw Error(Errc::invalid_argument, "letter-frequency vector has " + std::to_string(xi.size()) +
                                              " entries, expected " + std::to_string(letters()));
    }
    double norm = 0.0;
    for (double v : xi) {
      if (!(v >= 0.0)) throw Error(Errc::invalid_argument, "letter frequencies must be nonnegative");
      norm += v;
    }
    if (norm > 1.0 + 1e-12) {
      throw Error(Errc::invalid_argument, "letter frequencies sum to " + std::to_string(norm) + " > 1");
    }
    return std::min(norm, 1.0);
  }

  double descend(double q, std::vector<double>& xi, int budget, int& iterations) const {
    std::vector<double> g;
    double f = minimax_objective(q, xi, &g);
    double step = 0.1;
    std::vector<double> prev_xi;
    std::vector<double> prev_g;
    for (iterations = 0; iterations < budget; ++iterations) {
      if (!prev_xi.empty()) {
        double sy = 0.0;
        double ss = 0.0;
        for (std::size_t a = 0; a < xi.size(); ++a) {
          const double ds = xi[a] - prev_xi[a];
          sy += ds * (g[a] - prev_g[a]);
          ss += ds * ds;
        }
        if (sy > 0.0) step = std::clamp(ss / sy, 1e-8, 1e3);
      }
      bool moved = false;
      std::vector<double> cand;
      std::vector<double> cg;
      double fc = f;
      double move = 0.0;
      for (int bt = 0; bt < 50; ++bt, step *= 0.5) {
        std::vector<double> y(xi.size());
        for (std::size_t a = 0; a < xi.size(); ++a) y[a] = xi[a] - step * g[a];
        cand = detail::project_simplex(y, kSimplexFloor);
        double decrease = 0.0;
        move = 0.0;
        for (std::size_t a = 0; a < xi.size(); ++a) {
          decrease += g[a] * (xi[a] - cand[a]);
          move = std::max(move, std::abs(cand[a] - xi[a]));
        }
        if (move == 0.0) break;
        fc = minimax_objective(q, cand, &cg);
        if (fc <= f - 1e-4 * decrease) {
          moved = true;
          break;
        }
      }
      if (!moved) break;
      prev_xi = xi;
      prev_g = g;
      const double gain = f - fc;
      xi = cand;
      g = cg;
      f = fc;
      if (move < 1e-11 || gain < 1e-15) break;
    }
    return f;
  }

  Walk walk_;
  std::vector<double> psi_R_;
  double P_R_ = 0.0;
  double varrho_log_mu_ = 0.0;
  double c_rw_ = 0.0;
};

}  // namespace mfbrw
