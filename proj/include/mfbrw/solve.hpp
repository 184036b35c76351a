#pragma once

// Small one-dimensional solvers shared by the rate and spectrum code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <sstream>
#include <utility>
#include <vector>

#include <boost/math/tools/toms748_solve.hpp>

#include "mfbrw/error.hpp"

namespace mfbrw::detail {

/// Root of f on [lo, hi] given opposite signs at the ends (TOMS 748).
inline double bracketed_root(const std::function<double(double)>& f, double lo, double hi, double flo, double fhi,
                             std::uintmax_t max_iter = 200) {
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "root not bracketed on [" << lo << ", " << hi << "]: residuals " << flo << " and " << fhi;
    throw Error(Errc::root_out_of_range, msg.str());
  }
  auto tol = [](double a, double b) { return std::abs(b - a) <= 4e-16 * std::max(std::abs(a), std::abs(b)); };
  const auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, max_iter);
  return 0.5 * (r.first + r.second);
}

/// Golden-section maximization on [lo, hi] until the interval is below width.
inline std::pair<double, double> golden_max(const std::function<double(double)>& f, double lo, double hi,
                                            double width = 1e-10) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > width) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  // Compare against the endpoints; the maximum may sit on the boundary.
  double best_x = fc >= fd ? c : d;
  double best_f = std::max(fc, fd);
  for (double x : {lo, hi}) {
    const double v = f(x);
    if (v > best_f) {
      best_f = v;
      best_x = x;
    }
  }
  return {best_x, best_f};
}

/// Euclidean projection onto {x : x_i >= floor, sum x = 1}.
inline std::vector<double> project_simplex(const std::vector<double>& y, double floor) {
  const std::size_t n = y.size();
  const double mass = 1.0 - floor * static_cast<double>(n);
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = y[i] - floor;
  std::vector<double> sorted = z;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cum = 0.0;
  double theta = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cum += sorted[i];
    const double t = (cum - mass) / static_cast<double>(i + 1);
    if (sorted[i] - t > 0.0) theta = t;
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = floor + std::max(z[i] - theta, 0.0);
  return out;
}

}  // namespace mfbrw::detail
