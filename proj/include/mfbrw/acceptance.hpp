#pragma once

// Acceptance criteria as a registry: each entry computes its quantity, compares
// it with a pinned tolerance and reports both numbers. A criterion passes only
// when the numbers agree and it finished inside its time budget.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mfbrw/commands.hpp"
#include "mfbrw/first_passage.hpp"
#include "mfbrw/oracles.hpp"
#include "mfbrw/perron.hpp"
#include "mfbrw/rates.hpp"
#include "mfbrw/simulator.hpp"
#include "mfbrw/spectra.hpp"

namespace mfbrw::acceptance {

struct Context {
  int threads = std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
  std::optional<double> route_tol;  // overrides the route-agreement tolerances (AC4, AC7)
  std::filesystem::path scratch = std::filesystem::temp_directory_path() / "mfbrw_acceptance";
};

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string id;
  std::string title;
  double budget_seconds = 0.0;
  std::function<Outcome(const Context&)> run;
};

struct Verdict {
  std::string id;
  std::string title;
  bool pass = false;
  bool values_pass = false;
  bool in_budget = false;
  double seconds = 0.0;
  double budget_seconds = 0.0;
  std::string detail;

  json to_json() const {
    return {{"id", id},          {"title", title},   {"pass", pass},           {"values_pass", values_pass},
            {"in_budget", in_budget}, {"seconds", seconds}, {"budget_seconds", budget_seconds}, {"detail", detail}};
  }
};

namespace detail {

inline std::string g(double x) {
  std::ostringstream s;
  s.precision(10);
  s << x;
  return s.str();
}

inline StepDistribution random_symmetric(int rank, std::mt19937_64& rng, double mu_e) {
  std::uniform_real_distribution<double> u(0.2, 1.0);
  std::vector<double> w(rank);
  double total = 0.0;
  for (auto& x : w) total += (x = u(rng));
  for (auto& x : w) x *= (1.0 - mu_e) / (2.0 * total);
  return StepDistribution::from_generators(rank, mu_e, w);
}

inline std::vector<double> random_interior(std::mt19937_64& rng, int n, double floor = 0.05) {
  std::uniform_real_distribution<double> u(floor, 1.0);
  std::vector<double> x(n);
  double t = 0.0;
  for (auto& v : x) t += (v = u(rng));
  for (auto& v : x) v /= t;
  return x;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

/// Collects sub-checks; the first failure is reported first.
class Report {
 public:
  void check(bool ok, const std::string& what) {
    pass_ = pass_ && ok;
    (ok ? passed_ : failed_).push_back(what);
  }
  Outcome outcome() const {
    std::string d;
    for (const auto& f : failed_) d += (d.empty() ? "FAILED " : "; FAILED ") + f;
    for (const auto& p : passed_) d += (d.empty() ? "" : "; ") + p;
    return {pass_, d};
  }

 private:
  bool pass_ = true;
  std::vector<std::string> failed_;
  std::vector<std::string> passed_;
};

// ---- criteria ---------------------------------------------------------------------

inline Outcome ac1(const Context&) {
  Report rep;
  const double r2 = spectral_radius(StepDistribution::isotropic(2)).R;
  const double r3 = spectral_radius(StepDistribution::isotropic(3)).R;
  rep.check(std::abs(r2 - 2.0 / std::sqrt(3.0)) < 1e-8, "d=2 R=" + g(r2) + " vs 2/sqrt3=" + g(2.0 / std::sqrt(3.0)));
  rep.check(std::abs(r3 - 3.0 / std::sqrt(5.0)) < 1e-8, "d=3 R=" + g(r3) + " vs 3/sqrt5=" + g(3.0 / std::sqrt(5.0)));
  return rep.outcome();
}

inline Outcome ac2(const Context&) {
  Report rep;
  for (int d = 2; d <= 4; ++d) {
    const Walk w(StepDistribution::isotropic(d));
    const auto psi = w.psi_below(0.0);
    double worst = 0.0;
    for (double v : psi) worst = std::max(worst, std::abs(v + 0.5 * std::log(2.0 * d - 1.0)));
    rep.check(worst < 1e-8, "d=" + std::to_string(d) + " max|psi_a(ln R)+ln(2d-1)/2|=" + g(worst));
  }
  return rep.outcome();
}

inline Outcome ac3(const Context&) {
  std::mt19937_64 rng(3);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const Walk w(random_symmetric(2, rng, 0.3 * (i % 4) / 3.0));
    auto lam = w.psi_below(0.0);
    for (double& x : lam) x *= 2.0;
    worst = std::max(worst, std::abs(varrho(lam)));
  }
  return {worst < 1e-8, "20 random symmetric mu, max|varrho(2 psi(ln R))|=" + g(worst)};
}

inline Outcome ac4(const Context& ctx) {
  const double tol = ctx.route_tol.value_or(1e-5);
  std::mt19937_64 rng(4);
  std::vector<StepDistribution> mus{StepDistribution::isotropic(2)};
  for (int i = 0; i < 5; ++i) mus.push_back(random_symmetric(2, rng, 0.1 * (i % 3)));
  double worst = 0.0;
  double worst_q = 0.0, worst_leg = 0.0, worst_mm = 0.0;
  std::size_t worst_mu = 0;
  for (std::size_t k = 0; k < mus.size(); ++k) {
    const RateModel m(mus[k]);
    std::vector<double> leg(41), mm(41);
    parallel_for(41, ctx.threads, [&](std::size_t i) {
      leg[i] = m.rate_L_legendre(i / 40.0).value;
      mm[i] = m.rate_L_minimax(i / 40.0).value;
    });
    for (int i = 0; i <= 40; ++i) {
      const double gap = std::abs(leg[i] - mm[i]);
      if (gap > worst) worst = gap, worst_q = i / 40.0, worst_leg = leg[i], worst_mm = mm[i], worst_mu = k;
    }
  }
  return {worst < tol, "max gap " + g(worst) + " (tol " + g(tol) + ") at mu#" + std::to_string(worst_mu) + " q=" +
                           g(worst_q) + ": Legendre " + g(worst_leg) + ", minimax " + g(worst_mm)};
}

inline Outcome ac5(const Context&) {
  Report rep;
  std::mt19937_64 rng(5);
  std::vector<StepDistribution> mus{StepDistribution::isotropic(2), random_symmetric(2, rng, 0.0),
                                    random_symmetric(3, rng, 0.2)};
  for (std::size_t k = 0; k < mus.size(); ++k) {
    const RateModel m(mus[k]);
    const std::string tag = "mu#" + std::to_string(k) + " ";
    const double l0 = m.rate_L(0.0);
    rep.check(std::abs(l0 - m.lnR()) < 1e-8, tag + "L*(0)=" + g(l0) + " lnR=" + g(m.lnR()));
    const double lc = m.rate_L(m.escape_rate());
    rep.check(std::abs(lc) < 1e-8, tag + "L*(C_RW)=" + g(lc) + " C_RW=" + g(m.escape_rate()));
  }
  const double l1 = RateModel(StepDistribution::isotropic(2)).rate_L(1.0);
  rep.check(std::abs(l1 - std::log(4.0 / 3.0)) < 1e-6, "isotropic L*(1)=" + g(l1) + " ln(4/3)=" + g(std::log(4.0 / 3.0)));
  return rep.outcome();
}

inline Outcome ac6(const Context&) {
  Report rep;
  const auto mu = StepDistribution::isotropic(2);
  const RateModel m(mu);
  const int n = 2000;
  const auto law = length_distribution(mu, n);
  const double bound = 5.0 * std::log(n) / n;
  for (double q : {0.2, 0.5, 0.8}) {
    const int k = static_cast<int>(std::floor(q * n));
    const double emp = -law.log_at(k) / n;
    const double gap = std::abs(emp - m.rate_L(q));
    rep.check(gap <= bound, "q=" + g(q) + " -(1/n)lnP=" + g(emp) + " L*=" + g(m.rate_L(q)) + " gap " + g(gap) +
                                " <= " + g(bound));
  }
  return rep.outcome();
}

inline Outcome ac7(const Context& ctx) {
  Report rep;
  const double tol = ctx.route_tol.value_or(1e-6);
  const Spectra sp(StepDistribution::isotropic(2));
  const double R = sp.model().R();
  for (double r : {1.2, 1.5, R}) {
    const std::string tag = "r=" + g(r) + ": ";
    try {
      const auto a = sp.alpha_star(r, tol);
      const double spread = std::max({a.dim, a.dim_golden, a.dim_fixed_point}) -
                            std::min({a.dim, a.dim_golden, a.dim_fixed_point});
      rep.check(spread <= tol, tag + "max " + g(a.dim_golden) + ", P(ln r) " + g(a.dim) + ", fixed point " +
                                   g(a.dim_fixed_point) + " spread " + g(spread));
      if (r == R) {
        rep.check(std::abs(a.dim - 0.5 * std::log(3.0)) <= tol, tag + "dim " + g(a.dim) + " vs ln3/2 " + g(0.5 * std::log(3.0)));
        rep.check(std::abs(a.alpha) <= kGoldenWidth, tag + "alpha(R)=" + g(a.alpha));
      }
    } catch (const Error& e) {
      rep.check(false, tag + e.what());
    }
  }
  return rep.outcome();
}

inline Outcome ac8(const Context& ctx) {
  std::mt19937_64 rng(8);
  std::vector<StepDistribution> mus;
  for (int i = 0; i < 20; ++i) mus.push_back(random_symmetric(2 + i % 2, rng, 0.1 * (i % 4)));
  std::vector<double> margin(mus.size());
  parallel_for(mus.size(), ctx.threads, [&](std::size_t k) {
    const Spectra sp(mus[k]);
    const double cap = 0.5 * sp.model().log_branch();
    double worst = -1e300;
    for (double t : {0.2, 0.4, 0.6, 0.8, 1.0}) {
      const double r = t == 1.0 ? sp.model().R() : std::exp(t * sp.model().lnR());
      worst = std::max(worst, sp.alpha_star(r).dim - cap);
    }
    margin[k] = worst;
  });
  const double worst = *std::max_element(margin.begin(), margin.end());
  return {worst <= 1e-9, "20 mu x 5 r, max(dim - ln(2d-1)/2)=" + g(worst)};
}

inline Outcome ac9(const Context& ctx) {
  Report rep;
  const RateModel iso(StepDistribution::isotropic(2));
  const auto hi = iso.hypothesis_one(iso.default_s_grid(), ctx.threads);
  rep.check(hi.max_g <= 1e-8, "isotropic max g=" + g(hi.max_g));
  std::mt19937_64 rng(9);
  std::vector<StepDistribution> mus;
  for (int i = 0; i < 50; ++i) mus.push_back(random_symmetric(2, rng, 0.3 * (i % 5) / 4.0));
  std::vector<HypothesisReport> reps(mus.size());
  parallel_for(mus.size(), ctx.threads, [&](std::size_t k) {
    const RateModel m(mus[k]);
    reps[k] = m.hypothesis_one(m.default_s_grid(81));
  });
  double worst = -1e300, near = 0.0, far_gap = 0.0, root_gap = 0.0, max_root = -1e300;
  for (const auto& h : reps) {
    worst = std::max(worst, h.max_g);
    near = std::max(near, std::abs(h.g_near_radius));
    far_gap = std::max(far_gap, std::abs(h.g_far - h.limit_root));
    root_gap = std::max(root_gap, std::abs(h.limit_root - h.limit_root_varrho));
    max_root = std::max(max_root, h.limit_root);
  }
  near = std::max(near, std::abs(hi.g_near_radius));
  rep.check(worst <= 1e-6, "50 random mu max g=" + g(worst));
  rep.check(near < 1e-2, "g at ln R - 1e-6: max |g|=" + g(near));
  rep.check(max_root < 0.0 && root_gap < 1e-10, "s->-inf root negative (max " + g(max_root) +
                                                     "), bisection vs varrho gap " + g(root_gap));
  rep.check(far_gap < 1e-6, "g at far grid end vs limit root: max gap " + g(far_gap));
  return rep.outcome();
}

inline Outcome ac10(const Context&) {
  Report rep;
  std::mt19937_64 rng(10);
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    const auto xi = random_interior(rng, 4);
    worst = std::max(worst, std::abs(rho_star(xi).value - pair_measure_rate(xi).value));
  }
  rep.check(worst < 1e-5, "10 interior points max|rho* - pair rate|=" + g(worst));
  const double u = rho_star({0.25, 0.25, 0.25, 0.25}).value;
  rep.check(std::abs(u) < 1e-9, "rho*(uniform)=" + g(u));
  return rep.outcome();
}

inline Outcome ac11(const Context&) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int n = 10000;
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    std::vector<double> lam(4);
    for (auto& x : lam) x = u(rng);
    worst = std::max(worst, std::abs(log_partition_function(lam, 1.0, n) / n - varrho(lam)));
  }
  return {worst < 10.0 / n, "10 random lambda, n=1e4: max gap " + g(worst) + " < " + g(10.0 / n)};
}

inline Outcome ac12(const Context& ctx) {
  const auto mu = StepDistribution::isotropic(2);
  const auto p = OffspringDistribution::deterministic(2);
  const int n = 20;
  const std::size_t reps = 10000;
  const auto stats = replicate_level_stats(mu, p, n, 12, reps, ctx.threads, false);
  const auto expected = expected_level_counts(mu, 2.0, n);
  double worst_z = 0.0;
  int worst_m = 0;
  bool ok = true;
  for (int m = 0; m <= n; ++m) {
    double s1 = 0.0, s2 = 0.0;
    for (const auto& s : stats) {
      const double x = static_cast<double>(s.N[m]);
      s1 += x;
      s2 += x * x;
    }
    const double mean = s1 / reps;
    const double se = std::sqrt(std::max(0.0, (s2 - reps * mean * mean) / (reps - 1.0)) / reps);
    if (se == 0.0) {
      // Never hit (wrong parity): the expectation must vanish too.
      if (std::abs(mean - expected[m]) > 1e-12 * std::max(1.0, expected[m])) ok = false, worst_m = m;
      continue;
    }
    const double z = std::abs(mean - expected[m]) / se;
    if (z > worst_z) worst_z = z, worst_m = m;
  }
  ok = ok && worst_z <= 4.0;
  return {ok, "1e4 replicates, n=20: max |mean - r^n P(|Z_n|=m)|/SE = " + g(worst_z) + " at m=" +
                  std::to_string(worst_m) + " (threads " + std::to_string(ctx.threads) + ")"};
}

inline Outcome ac13(const Context& ctx) {
  Report rep;
  // With mu(e) = 0 the target length has the wrong parity at odd n; a lazy walk keeps every length reachable.
  const auto mu = StepDistribution::isotropic(2, 0.2);
  const RateModel model(mu);
  const double r = 1.8;
  const auto p = OffspringDistribution::binary(r);
  std::vector<double> med;
  std::vector<double> floors;
  for (int n : {15, 25}) {
    const int m = static_cast<int>(std::floor(model.escape_rate() * n));
    const auto stats = replicate_level_stats(mu, p, n, 13, 50, ctx.threads, false);
    std::vector<double> gaps;
    for (const auto& s : stats) gaps.push_back(std::abs(s.log_rate(m) - std::log(r)));
    med.push_back(median(gaps));
    floors.push_back(std::abs(length_distribution(mu, n).log_at(m)) / n);
  }
  rep.check(med[1] < med[0], "median gap n=15: " + g(med[0]) + ", n=25: " + g(med[1]));
  rep.check(med[1] < 0.05, "median gap at n=25 " + g(med[1]) + " < 0.05 (mean-field floor |(1/n)ln P(|Z_n|=m)| = " +
                               g(floors[1]) + ")");
  return rep.outcome();
}

inline Outcome ac14(const Context&) {
  const auto mu = StepDistribution::isotropic(2);
  std::vector<double> e;
  for (int n : {200, 400, 800}) e.push_back(exceedance_probability(mu, n, n / 2, 0.2));
  return {e[1] < e[0] && e[2] < e[1], "exceedance n=200: " + g(e[0]) + ", 400: " + g(e[1]) + ", 800: " + g(e[2])};
}

inline Outcome ac15(const Context& ctx) {
  namespace fs = std::filesystem;
  RunConfig cfg;
  cfg.offspring.law = "binary";
  cfg.offspring.mean = 1.8;
  cfg.simulate.n = 12;
  cfg.simulate.replicates = 40;
  cfg.simulate.rays = 200;
  cfg.seed = 15;
  std::vector<std::vector<std::string>> runs;
  std::vector<std::string> names;
  for (int t : {1, 3, std::max(2, ctx.threads)}) {
    cfg.threads = t;
    cfg.out = (ctx.scratch / ("ac15_t" + std::to_string(t))).string();
    fs::remove_all(cfg.out);
    const auto res = cmd_simulate(cfg);
    std::vector<std::string> bytes;
    names.clear();
    for (const auto& f : res.files) {
      if (f.size() < 4 || f.substr(f.size() - 4) != ".csv") continue;
      names.push_back(f);
      bytes.push_back(read_text(fs::path(cfg.out) / f));
    }
    runs.push_back(std::move(bytes));
  }
  bool same = true;
  std::string diff;
  for (std::size_t k = 1; k < runs.size(); ++k) {
    for (std::size_t f = 0; f < names.size(); ++f) {
      if (runs[k][f] != runs[0][f]) same = false, diff = names[f];
    }
  }
  return {same && !names.empty(), same ? std::to_string(names.size()) + " CSVs byte-identical at 1, 3 and " +
                                             std::to_string(std::max(2, ctx.threads)) + " workers"
                                       : "differs: " + diff};
}

}  // namespace detail

inline const std::vector<Criterion>& registry() {
  static const std::vector<Criterion> all{
      {"AC1", "spectral radius closed forms", 1.0, detail::ac1},
      {"AC2", "first-passage boundary identity", 1.0, detail::ac2},
      {"AC3", "critical eigenvalue identity", 5.0, detail::ac3},
      {"AC4", "dual-route rate function", 60.0, detail::ac4},
      {"AC5", "rate function boundary values", 5.0, detail::ac5},
      {"AC6", "oracle convergence of L*", 10.0, detail::ac6},
      {"AC7", "dimension triple agreement", 30.0, detail::ac7},
      {"AC8", "half-dimension bound", 120.0, detail::ac8},
      {"AC9", "Hypothesis I at rank 2", 300.0, detail::ac9},
      {"AC10", "rho* oracle equivalence", 120.0, detail::ac10},
      {"AC11", "free energy", 10.0, detail::ac11},
      {"AC12", "many-to-one", 120.0, detail::ac12},
      {"AC13", "level-set LLN trend", 300.0, detail::ac13},
      {"AC14", "conditional profile exceedance", 60.0, detail::ac14},
      {"AC15", "simulation determinism", 60.0, detail::ac15},
  };
  return all;
}

inline const Criterion& find(const std::string& id) {
  for (const auto& c : registry()) {
    if (c.id == id) return c;
  }
  throw Error(Errc::config, "unknown criterion '" + id + "'");
}

inline Verdict run(const Criterion& c, const Context& ctx) {
  Verdict v;
  v.id = c.id;
  v.title = c.title;
  v.budget_seconds = c.budget_seconds;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const auto o = c.run(ctx);
    v.values_pass = o.pass;
    v.detail = o.detail;
  } catch (const std::exception& e) {
    v.values_pass = false;
    v.detail = std::string("exception: ") + e.what();
  }
  v.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  v.in_budget = v.seconds <= v.budget_seconds;
  v.pass = v.values_pass && v.in_budget;
  return v;
}

inline std::string format_line(const Verdict& v) {
  std::ostringstream s;
  s << (v.pass ? "PASS " : "FAIL ") << v.id << " [" << v.title << "] " << std::fixed;
  s.precision(2);
  s << v.seconds << "s/" << v.budget_seconds << "s";
  if (!v.in_budget) s << " OVER BUDGET";
  s << " : " << v.detail;
  return s.str();
}

}  // namespace mfbrw::acceptance
