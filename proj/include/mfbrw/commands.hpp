#pragma once

// The spectrum / simulate / oracle commands as library calls, so the CLI and
// the acceptance suite run the same code.

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "mfbrw/config.hpp"
#include "mfbrw/io.hpp"
#include "mfbrw/oracles.hpp"
#include "mfbrw/rates.hpp"
#include "mfbrw/simulator.hpp"
#include "mfbrw/spectra.hpp"

namespace mfbrw {

struct CommandResult {
  std::string command;
  std::vector<std::string> files;  // relative to the output directory
  json summary;
};

namespace detail {

class OutputDir {
 public:
  OutputDir(const RunConfig& cfg, std::string command)
      : root_(cfg.out), prov_{cfg.hash()}, started_(utc_timestamp()) {
    result_.command = std::move(command);
  }

  void csv(const std::string& name, const CsvTable& t) { text(name, t.str(prov_)); }
  void text(const std::string& name, const std::string& body) {
    write_text(root_ / name, body);
    result_.files.push_back(name);
  }
  const Provenance& provenance() const noexcept { return prov_; }
  const std::vector<std::string>& files() const noexcept { return result_.files; }

  /// Writes the manifest (the only file with wall-clock time) and returns the result.
  CommandResult finish(const RunConfig& cfg, json summary) {
    result_.summary = std::move(summary);
    json m;
    m["schema"] = kSchema;
    m["version"] = kVersion;
    m["command"] = result_.command;
    m["config_hash"] = prov_.config_hash;
    m["seed"] = cfg.seed;
    m["threads"] = cfg.threads;
    m["started"] = started_;
    m["finished"] = utc_timestamp();
    m["files"] = result_.files;
    m["config"] = cfg.to_json();
    write_text(root_ / "manifest.json", dump_json(m));
    return result_;
  }

 private:
  std::filesystem::path root_;
  Provenance prov_;
  std::string started_;
  CommandResult result_;
};

inline std::vector<double> uniform_grid(double lo, double hi, int points) {
  std::vector<double> g(points);
  for (int i = 0; i < points; ++i) g[i] = lo + (hi - lo) * i / (points - 1.0);
  g.back() = hi;
  return g;
}

}  // namespace detail

// ---- spectrum ---------------------------------------------------------------

inline CommandResult cmd_spectrum(const RunConfig& cfg) {
  validate_config(cfg);
  const Spectra sp(cfg.step_distribution());
  const RateModel& m = sp.model();
  const double r = cfg.r.value_or(m.R());
  if (!(r > 1.0 && r <= m.R() * (1.0 + kPhaseSlack))) {
    throw Error(Errc::config, "r = " + format_double(r) + " is outside the transient phase 1 < r <= R = " +
                                  format_double(m.R()) +
                                  " (r <= 1: no growth; r > R: every site is revisited forever and the limit-set "
                                  "spectra are undefined)");
  }
  detail::OutputDir out(cfg, "spectrum");
  const int threads = cfg.threads;

  // Rate function, both routes.
  const auto q = detail::uniform_grid(0.0, 1.0, cfg.grids.q_points);
  const auto prof = m.rate_profile(q, threads);
  std::vector<double> minimax(q.size());
  parallel_for(q.size(), threads, [&](std::size_t i) { minimax[i] = m.rate_L_minimax(q[i]).value; });
  CsvTable rate({"q", "Lstar", "dLstar", "s_of_q", "Lstar_minimax", "route_gap"});
  double worst = 0.0;
  std::size_t worst_i = 0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double gap = std::abs(prof.Lstar[i] - minimax[i]);
    if (gap > worst) worst = gap, worst_i = i;
    rate.row().add(q[i]).add(prof.Lstar[i]).add(prof.dLstar[i]).add(prof.s_of_q[i]).add(minimax[i]).add(gap);
  }
  out.csv("rate_profile.csv", rate);
  if (worst > cfg.tolerances.route) {
    throw Error(Errc::route_mismatch, "rate function routes disagree at q = " + format_double(q[worst_i]) +
                                          ": Legendre " + format_double(prof.Lstar[worst_i]) + ", minimax " +
                                          format_double(minimax[worst_i]) + " (tolerance " +
                                          format_double(cfg.tolerances.route) + ")");
  }

  const auto s = m.default_s_grid(cfg.grids.s_points);
  const auto pc = m.pressure_curve(s, threads);
  CsvTable pressure({"s", "P", "Pprime", "hatP"});
  for (std::size_t i = 0; i < s.size(); ++i) pressure.row().add(s[i]).add(pc.P[i]).add(pc.Pprime[i]).add(pc.hatP[i]);
  out.csv("pressure_curve.csv", pressure);

  const auto hyp = m.hypothesis_one(s, threads);
  CsvTable hcsv({"s", "g"});
  for (std::size_t i = 0; i < s.size(); ++i) hcsv.row().add(s[i]).add(hyp.g[i]);
  out.csv("hypothesis_I.csv", hcsv);

  const auto table = sp.spectrum_table(r, cfg.grids.alpha_points, threads);
  CsvTable spec({"alpha", "beta", "dimE", "dimLambda_general_upper", "dimLambda_lower", "dimLambda_upper", "exact"});
  for (std::size_t k = 0; k < table.alpha.size(); ++k) {
    spec.row()
        .add(table.alpha[k])
        .add(table.beta[k])
        .add(table.dimE[k])
        .add(table.dimLambda_point[k])
        .add(table.dimLambda_lower[k])
        .add(table.dimLambda_upper[k])
        .add(static_cast<bool>(table.exact[k]));
  }
  out.csv("spectrum_table.csv", spec);

  const auto a = sp.alpha_star(r, cfg.tolerances.dim);
  json j;
  j["schema"] = kSchema;
  j["version"] = kVersion;
  j["config_hash"] = out.provenance().config_hash;
  j["rank"] = m.mu().rank();
  j["mu"] = {{"identity", m.mu().identity_weight()}, {"letters", m.mu().weights()}};
  j["r"] = r;
  j["R"] = m.R();
  j["C_RW"] = m.escape_rate();
  j["isotropic"] = m.mu().is_isotropic();
  j["speed_window"] = {{"lower", table.window.lower}, {"upper", table.window.upper}};
  j["alpha_star"] = {{"alpha", a.alpha},
                     {"dim_maximization", a.dim_golden},
                     {"dim_pressure", a.dim},
                     {"dim_fixed_point", a.dim_fixed_point}};
  j["dim_Lambda"] = a.dim;
  j["hypothesis_I"] = {{"max_g", json_number(hyp.max_g)},
                       {"argmax_s", hyp.argmax_s},
                       {"holds", hyp.max_g <= 1e-6},
                       {"limit_root", hyp.limit_root}};
  j["files"] = out.files();
  out.text("summary.json", dump_json(j));
  return out.finish(cfg, j);
}

// ---- simulate ---------------------------------------------------------------

inline CommandResult cmd_simulate(const RunConfig& cfg) {
  validate_config(cfg);
  const auto mu = cfg.step_distribution();
  const auto p = cfg.offspring_distribution();
  if (cfg.r && std::abs(*cfg.r - p.mean()) > 1e-12) {
    throw Error(Errc::config, "r = " + format_double(*cfg.r) + " conflicts with the offspring mean " +
                                  format_double(p.mean()) + "; set the offspring law instead");
  }
  const double r = p.mean();
  const int n = cfg.simulate.n;
  const std::size_t reps = cfg.simulate.replicates;
  detail::OutputDir out(cfg, "simulate");

  const auto stats = replicate_level_stats(mu, p, n, cfg.seed, reps, cfg.threads, cfg.simulate.distinct);

  CsvTable per({"replicate", "m", "N", "NF"});
  CsvTable rep_csv({"replicate", "population", "max_multiplicity", "log_max_multiplicity_rate"});
  for (const auto& s : stats) {
    for (int k = 0; k <= n; ++k) {
      per.row().add(s.replicate).add(k).add(s.N[k]);
      if (cfg.simulate.distinct) {
        per.add(s.NF[k]);
      } else {
        per.add("");
      }
    }
    rep_csv.row().add(s.replicate).add(s.population);
    if (cfg.simulate.distinct) {
      rep_csv.add(s.max_multiplicity).add(n > 0 ? std::log(static_cast<double>(s.max_multiplicity)) / n : 0.0);
    } else {
      rep_csv.add("").add("");
    }
  }
  out.csv("level_stats.csv", per);
  out.csv("replicates.csv", rep_csv);

  // Many-to-one comparison and level rates.
  const RateModel model(mu);
  std::vector<double> expected(n + 1, std::nan(""));
  bool have_expected = true;
  try {
    expected = expected_level_counts(mu, r, n);
  } catch (const Error& e) {
    if (e.code() != Errc::resource_limit) throw;
    have_expected = false;
  }
  CsvTable sum({"m", "mean_N", "se_N", "expected_N", "z", "empirical_rate", "analytic_rate", "gap"});
  for (int k = 0; k <= n; ++k) {
    double s1 = 0.0;
    double s2 = 0.0;
    for (const auto& s : stats) {
      const double x = static_cast<double>(s.N[k]);
      s1 += x;
      s2 += x * x;
    }
    const double mean = s1 / reps;
    const double se = reps > 1 ? std::sqrt(std::max(0.0, (s2 - reps * mean * mean) / (reps - 1.0)) / reps) : 0.0;
    const double z = se > 0.0 ? (mean - expected[k]) / se : std::nan("");
    const double emp = n > 0 ? std::log(mean) / n : std::nan("");
    const double ana = n > 0 ? std::log(r) - model.rate_L(static_cast<double>(k) / n) : std::nan("");
    sum.row().add(k).add(mean).add(se).add(expected[k]).add(z).add(emp).add(ana).add(emp - ana);
  }
  out.csv("level_summary.csv", sum);

  json j;
  j["schema"] = kSchema;
  j["version"] = kVersion;
  j["config_hash"] = out.provenance().config_hash;
  j["n"] = n;
  j["replicates"] = reps;
  j["r"] = r;
  j["C_RW"] = model.escape_rate();
  j["many_to_one_available"] = have_expected;

  if (cfg.simulate.rays > 0 && n > 0) {
    const auto arena = run_brw(mu, p, n, cfg.seed, 0);
    const auto v = ray_speeds(arena, cfg.simulate.rays, cfg.seed);
    CsvTable rays({"ray", "speed"});
    for (std::size_t i = 0; i < v.size(); ++i) rays.row().add(static_cast<std::uint64_t>(i)).add(v[i]);
    out.csv("ray_speeds.csv", rays);
    const auto h = histogram(v, cfg.simulate.ray_bins);
    CsvTable hist({"bin_lo", "bin_hi", "count"});
    for (std::size_t b = 0; b < h.counts.size(); ++b) hist.row().add(h.edges[b]).add(h.edges[b + 1]).add(h.counts[b]);
    out.csv("ray_histogram.csv", hist);
    double mean = 0.0;
    for (double x : v) mean += x / v.size();
    j["ray_mean_speed"] = mean;
  }
  j["files"] = out.files();
  out.text("summary.json", dump_json(j));
  return out.finish(cfg, j);
}

// ---- oracle -----------------------------------------------------------------

inline CommandResult cmd_oracle(const RunConfig& cfg) {
  validate_config(cfg);
  const auto mu = cfg.step_distribution();
  const auto& o = cfg.oracle;
  detail::OutputDir out(cfg, "oracle");
  json j;
  j["schema"] = kSchema;
  j["version"] = kVersion;
  j["config_hash"] = out.provenance().config_hash;
  j["kind"] = o.kind;

  if (o.kind == "length-dist") {
    const auto law = length_distribution(mu, o.n);
    CsvTable t({"m", "probability", "log_probability"});
    for (int k = 0; k <= o.n; ++k) t.row().add(k).add(law.at(k)).add(law.log_at(k));
    out.csv("length_distribution.csv", t);
    j["n"] = o.n;
  } else if (o.kind == "profile") {
    const int l = o.l < 0 ? o.n / 2 : o.l;
    const auto prof = conditional_profile(mu, o.n, l, o.deltas);
    CsvTable t({"k", "j", "probability"});
    for (int k = 0; k <= o.n; ++k) {
      for (int x = 0; x <= o.n; ++x) {
        if (prof.at(k, x) > 0.0) t.row().add(k).add(x).add(prof.at(k, x));
      }
    }
    out.csv("bridge_profile.csv", t);
    CsvTable e({"delta", "exceedance"});
    for (std::size_t i = 0; i < prof.deltas.size(); ++i) e.row().add(prof.deltas[i]).add(prof.exceedance[i]);
    out.csv("exceedance.csv", e);
    const auto ml = prof.mean_length();
    CsvTable mcsv({"k", "mean_length", "straight_line"});
    for (int k = 0; k <= o.n; ++k) mcsv.row().add(k).add(ml[k]).add(static_cast<double>(k) * l / o.n);
    out.csv("bridge_mean.csv", mcsv);
    j["n"] = o.n;
    j["l"] = l;
    j["log_endpoint"] = prof.log_endpoint;
  } else if (o.kind == "partition") {
    const std::vector<double> lambda = o.lambda.empty() ? std::vector<double>(mu.alphabet_size(), 0.0) : o.lambda;
    const double lz = log_partition_function(lambda, o.beta, o.n);
    std::vector<double> bl(lambda);
    for (double& x : bl) x *= o.beta;
    CsvTable t({"n", "beta", "log_Z", "free_energy", "varrho"});
    t.row().add(o.n).add(o.beta).add(lz).add(lz / o.n).add(varrho(bl));
    out.csv("partition.csv", t);
  } else if (o.kind == "word-count") {
    const auto wc = count_words_by_counts(mu.rank(), o.counts);
    // count is exact below 2^64; past that it is the long double estimate.
    CsvTable t({"count", "overflow", "log_count"});
    auto& row = t.row();
    if (wc.overflow) {
      row.add(format_double(static_cast<double>(wc.value)));
    } else {
      row.add(std::to_string(wc.exact));
    }
    row.add(wc.overflow ? 1 : 0).add(wc.log_value);
    out.csv("word_count.csv", t);
  } else if (o.kind == "level-count") {
    const double r = cfg.r.value_or(cfg.offspring_distribution().mean());
    const auto e = expected_level_counts(mu, r, o.n);
    CsvTable t({"m", "expected_N"});
    for (int k = 0; k <= o.n; ++k) t.row().add(k).add(e[k]);
    out.csv("expected_level_counts.csv", t);
    j["r"] = r;
  }
  j["files"] = out.files();
  out.text("summary.json", dump_json(j));
  return out.finish(cfg, j);
}

}  // namespace mfbrw
