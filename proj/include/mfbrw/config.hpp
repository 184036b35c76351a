#pragma once

// RunConfig: one JSON document drives every command. Unknown keys are
// rejected at every level so typos fail loudly.

#include <cstdint>
#include <cstdlib>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mfbrw/group.hpp"
#include "mfbrw/io.hpp"
#include "mfbrw/simulator.hpp"

namespace mfbrw {

struct MuSpec {
  int rank = 2;
  double identity = 0.0;
  std::vector<double> generators;  // mirrored to inverses
  std::vector<double> letters;     // full 2d vector, symmetry checked
};

struct OffspringSpec {
  std::string law = "deterministic";  // deterministic | binary | binomial | geometric | custom
  int k = 2;                          // deterministic
  double mean = 1.8;                  // binary
  int m = 2;                          // binomial: 1 + Bin(m, p)
  double p = 0.5;                     // binomial, geometric
  int K = 4;                          // geometric truncation
  std::vector<double> weights;        // custom, over k = 1..K
};

struct GridSpec {
  int q_points = 41;
  int s_points = 201;
  int alpha_points = 21;
};

struct ToleranceSpec {
  double route = 1e-5;
  double dim = 1e-6;
};

struct CapSpec {
  std::optional<std::size_t> nodes;
  std::optional<std::size_t> ball;
};

struct SimulateSpec {
  int n = 20;
  std::size_t replicates = 100;
  std::size_t rays = 1000;
  int ray_bins = 20;
  bool distinct = true;
};

struct OracleSpec {
  std::string kind = "length-dist";  // length-dist | profile | partition | word-count | level-count
  int n = 2;
  int l = -1;                        // profile endpoint; -1 means floor(n/2)
  std::vector<double> deltas{0.1, 0.2, 0.3};
  std::vector<double> lambda;        // partition
  double beta = 1.0;
  std::vector<unsigned> counts;      // word-count
};

struct RunConfig {
  MuSpec mu;
  OffspringSpec offspring;
  std::optional<double> r;  // empty: r = R (spectrum) or the offspring mean (simulate)
  GridSpec grids;
  ToleranceSpec tolerances;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out = "out";
  CapSpec caps;
  SimulateSpec simulate;
  OracleSpec oracle;

  StepDistribution step_distribution() const {
    if (!mu.letters.empty()) return StepDistribution::from_letters(mu.rank, mu.identity, mu.letters);
    if (!mu.generators.empty()) return StepDistribution::from_generators(mu.rank, mu.identity, mu.generators);
    return StepDistribution::isotropic(mu.rank, mu.identity);
  }

  OffspringDistribution offspring_distribution() const {
    const auto& o = offspring;
    if (o.law == "deterministic") return OffspringDistribution::deterministic(o.k);
    if (o.law == "binary") return OffspringDistribution::binary(o.mean);
    if (o.law == "binomial") return OffspringDistribution::one_plus_binomial(o.m, o.p);
    if (o.law == "geometric") return OffspringDistribution::truncated_geometric(o.p, o.K);
    if (o.law == "custom") return OffspringDistribution::custom(o.weights);
    throw Error(Errc::config, "offspring.law: unknown law '" + o.law + "'");
  }

  json to_json() const;

  /// Hash of everything that can change output bytes (not threads, not out).
  std::string hash() const {
    json j = to_json();
    j.erase("threads");
    j.erase("out");
    return hex64(fnv1a(j.dump()));
  }

  /// Exports the caps to the environment read by the library.
  void apply_caps() const {
    if (caps.nodes) setenv("MFBRW_NODE_CAP", std::to_string(*caps.nodes).c_str(), 1);
    if (caps.ball) setenv("MFBRW_BALL_CAP", std::to_string(*caps.ball).c_str(), 1);
  }
};

namespace detail {

inline void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw Error(Errc::config, where + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : obj.items()) {
    if (!ok.count(k)) throw Error(Errc::config, "unknown key '" + (where.empty() ? k : where + "." + k) + "'");
  }
}

template <class T>
void read(const json& obj, const char* key, T& into, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    into = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(Errc::config, (where.empty() ? "" : where + ".") + key + ": wrong type (" + obj.at(key).dump() + ")");
  }
}

}  // namespace detail

inline RunConfig parse_config(const json& j) {
  using detail::read;
  detail::reject_unknown(j, "", {"mu", "offspring", "r", "grids", "tolerances", "seed", "threads", "out", "caps",
                                 "simulate", "oracle"});
  RunConfig c;
  if (j.contains("mu")) {
    const auto& m = j["mu"];
    detail::reject_unknown(m, "mu", {"rank", "identity", "generators", "letters"});
    read(m, "rank", c.mu.rank, "mu");
    read(m, "identity", c.mu.identity, "mu");
    read(m, "generators", c.mu.generators, "mu");
    read(m, "letters", c.mu.letters, "mu");
    if (!c.mu.generators.empty() && !c.mu.letters.empty()) {
      throw Error(Errc::config, "mu: give either generators or letters, not both");
    }
  }
  if (j.contains("offspring")) {
    const auto& o = j["offspring"];
    detail::reject_unknown(o, "offspring", {"law", "k", "mean", "m", "p", "K", "weights"});
    read(o, "law", c.offspring.law, "offspring");
    read(o, "k", c.offspring.k, "offspring");
    read(o, "mean", c.offspring.mean, "offspring");
    read(o, "m", c.offspring.m, "offspring");
    read(o, "p", c.offspring.p, "offspring");
    read(o, "K", c.offspring.K, "offspring");
    read(o, "weights", c.offspring.weights, "offspring");
  }
  if (j.contains("r")) {
    const auto& r = j["r"];
    if (r.is_string() && r.get<std::string>() == "R") {
      c.r.reset();
    } else if (r.is_number()) {
      c.r = r.get<double>();
    } else {
      throw Error(Errc::config, "r: expected a number or \"R\"");
    }
  }
  if (j.contains("grids")) {
    const auto& g = j["grids"];
    detail::reject_unknown(g, "grids", {"q_points", "s_points", "alpha_points"});
    read(g, "q_points", c.grids.q_points, "grids");
    read(g, "s_points", c.grids.s_points, "grids");
    read(g, "alpha_points", c.grids.alpha_points, "grids");
  }
  if (j.contains("tolerances")) {
    const auto& t = j["tolerances"];
    detail::reject_unknown(t, "tolerances", {"route", "dim"});
    read(t, "route", c.tolerances.route, "tolerances");
    read(t, "dim", c.tolerances.dim, "tolerances");
  }
  read(j, "seed", c.seed, "");
  read(j, "threads", c.threads, "");
  read(j, "out", c.out, "");
  if (j.contains("caps")) {
    const auto& k = j["caps"];
    detail::reject_unknown(k, "caps", {"nodes", "ball"});
    std::size_t v = 0;
    if (k.contains("nodes")) c.caps.nodes = (read(k, "nodes", v, "caps"), v);
    if (k.contains("ball")) c.caps.ball = (read(k, "ball", v, "caps"), v);
  }
  if (j.contains("simulate")) {
    const auto& s = j["simulate"];
    detail::reject_unknown(s, "simulate", {"n", "replicates", "rays", "ray_bins", "distinct"});
    read(s, "n", c.simulate.n, "simulate");
    read(s, "replicates", c.simulate.replicates, "simulate");
    read(s, "rays", c.simulate.rays, "simulate");
    read(s, "ray_bins", c.simulate.ray_bins, "simulate");
    read(s, "distinct", c.simulate.distinct, "simulate");
  }
  if (j.contains("oracle")) {
    const auto& o = j["oracle"];
    detail::reject_unknown(o, "oracle", {"kind", "n", "l", "deltas", "lambda", "beta", "counts"});
    read(o, "kind", c.oracle.kind, "oracle");
    read(o, "n", c.oracle.n, "oracle");
    read(o, "l", c.oracle.l, "oracle");
    read(o, "deltas", c.oracle.deltas, "oracle");
    read(o, "lambda", c.oracle.lambda, "oracle");
    read(o, "beta", c.oracle.beta, "oracle");
    read(o, "counts", c.oracle.counts, "oracle");
  }
  return c;
}

/// Range checks that do not need the numerical modules.
inline void validate_config(const RunConfig& c) {
  auto fail = [](const std::string& m) { throw Error(Errc::config, m); };
  if (c.mu.rank < 2) fail("mu.rank must be >= 2");
  if (c.threads < 1) fail("threads must be >= 1");
  if (c.grids.q_points < 2 || c.grids.s_points < 2 || c.grids.alpha_points < 2) fail("grids: every grid needs >= 2 points");
  if (!(c.tolerances.route >= 0.0) || !(c.tolerances.dim >= 0.0)) fail("tolerances must be nonnegative");
  if (c.simulate.n < 0) fail("simulate.n must be >= 0");
  if (c.simulate.replicates < 1) fail("simulate.replicates must be >= 1");
  if (c.simulate.ray_bins < 1) fail("simulate.ray_bins must be >= 1");
  if (c.oracle.n < 0) fail("oracle.n must be >= 0");
  if (c.caps.nodes && *c.caps.nodes == 0) fail("caps.nodes must be positive");
  if (c.caps.ball && *c.caps.ball == 0) fail("caps.ball must be positive");
  static const std::set<std::string> kinds{"length-dist", "profile", "partition", "word-count", "level-count"};
  if (!kinds.count(c.oracle.kind)) fail("oracle.kind: unknown kind '" + c.oracle.kind + "'");
  // Building the laws runs their own invariant checks; report them as config errors.
  try {
    (void)c.step_distribution();
    (void)c.offspring_distribution();
  } catch (const Error& e) {
    if (e.code() == Errc::config) throw;
    fail(std::string("invalid law: ") + e.what());
  }
}

inline json RunConfig::to_json() const {
  json j;
  j["mu"] = {{"rank", mu.rank}, {"identity", mu.identity}, {"generators", mu.generators}, {"letters", mu.letters}};
  j["offspring"] = {{"law", offspring.law}, {"k", offspring.k},         {"mean", offspring.mean},
                    {"m", offspring.m},     {"p", offspring.p},         {"K", offspring.K},
                    {"weights", offspring.weights}};
  j["r"] = r ? json(*r) : json("R");
  j["grids"] = {{"q_points", grids.q_points}, {"s_points", grids.s_points}, {"alpha_points", grids.alpha_points}};
  j["tolerances"] = {{"route", tolerances.route}, {"dim", tolerances.dim}};
  j["seed"] = seed;
  j["threads"] = threads;
  j["out"] = out;
  j["caps"] = json::object();
  if (caps.nodes) j["caps"]["nodes"] = *caps.nodes;
  if (caps.ball) j["caps"]["ball"] = *caps.ball;
  j["simulate"] = {{"n", simulate.n},
                   {"replicates", simulate.replicates},
                   {"rays", simulate.rays},
                   {"ray_bins", simulate.ray_bins},
                   {"distinct", simulate.distinct}};
  j["oracle"] = {{"kind", oracle.kind},     {"n", oracle.n},           {"l", oracle.l},        {"deltas", oracle.deltas},
                 {"lambda", oracle.lambda}, {"beta", oracle.beta},     {"counts", oracle.counts}};
  return j;
}

inline RunConfig load_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw Error(Errc::config, path + ": " + e.what());
  }
  return parse_config(j);
}

}  // namespace mfbrw
