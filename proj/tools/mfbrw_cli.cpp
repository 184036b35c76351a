// mfbrw: spectra, oracles, simulation and the acceptance suite from the shell.
//
// Exit codes: 0 ok, 1 numerical failure, 2 configuration error, 3 acceptance failure.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mfbrw/acceptance.hpp"
#include "mfbrw/commands.hpp"
#include "mfbrw/config.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNumeric = 1;
constexpr int kExitConfig = 2;
constexpr int kExitAcceptance = 3;

int exit_code_for(mfbrw::Errc code) {
  using mfbrw::Errc;
  switch (code) {
    case Errc::config:
    case Errc::invalid_argument:
    case Errc::rank_mismatch:
    case Errc::out_of_phase:
    case Errc::empty_set:
    case Errc::zero_speed_off_critical:
      return kExitConfig;
    default:
      return kExitNumeric;
  }
}

void print_files(const mfbrw::CommandResult& res, const std::string& out) {
  for (const auto& f : res.files) std::cout << out << "/" << f << "\n";
  std::cout << out << "/manifest.json\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mfbrw: multifractal spectra of branching random walks on free groups"};
  app.require_subcommand(1);
  app.fallthrough();
  app.footer(
      "Environment:\n"
      "  MFBRW_NODE_CAP  node cap for simulated trees (default 50000000); a breach aborts with the depth reached\n"
      "  MFBRW_BALL_CAP  word cap for ball dynamic programs (default 10000000)\n"
      "  caps.nodes / caps.ball in the config file override both.\n"
      "Exit codes: 0 ok, 1 numerical failure, 2 configuration error, 3 acceptance failure.");

  std::string config_path;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--out", out, "output directory");
  app.add_option("--seed", seed, "RNG seed (u64)");
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  // Per-command overrides shared by several subcommands.
  std::optional<int> rank;
  std::optional<double> identity;
  std::vector<double> generators;
  std::optional<std::string> r_text;
  auto add_mu = [&](CLI::App* sub) {
    sub->add_option("--rank", rank, "free group rank d");
    sub->add_option("--identity", identity, "identity weight mu(e)");
    sub->add_option("--generators", generators, "generator weights (mirrored to inverses)")->delimiter(',');
  };

  auto* spectrum = app.add_subcommand("spectrum", "rate function, pressure, Hypothesis I, dimension spectra");
  add_mu(spectrum);
  spectrum->add_option("--r", r_text, "mean offspring r in (1, R], or R");
  std::optional<int> q_points, alpha_points, s_points;
  spectrum->add_option("--q-points", q_points, "rate-function grid size");
  spectrum->add_option("--s-points", s_points, "pressure grid size");
  spectrum->add_option("--alpha-points", alpha_points, "speed grid size for the spectrum table");

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo branching random walk level statistics");
  add_mu(simulate);
  std::optional<int> sim_n;
  std::optional<std::size_t> reps, rays;
  std::optional<std::string> law;
  std::optional<double> mean;
  std::optional<int> kids;
  bool no_distinct = false;
  simulate->add_option("--n", sim_n, "generation");
  simulate->add_option("--reps", reps, "replicates");
  simulate->add_option("--rays", rays, "ray-speed samples (0 disables)");
  simulate->add_option("--offspring", law, "deterministic | binary | binomial | geometric | custom");
  simulate->add_option("--mean", mean, "mean for the binary law");
  simulate->add_option("--k", kids, "children for the deterministic law");
  simulate->add_flag("--no-distinct", no_distinct, "skip N^F and multiplicities (faster)");

  auto* oracle = app.add_subcommand("oracle", "exact dynamic-programming oracles");
  add_mu(oracle);
  std::optional<std::string> kind;
  std::optional<int> oracle_n, oracle_l;
  std::vector<double> lambda;
  std::optional<double> beta;
  std::vector<unsigned> counts;
  oracle->add_option("kind", kind, "length-dist | profile | partition | word-count | level-count");
  oracle->add_option("--n", oracle_n, "steps / word length");
  oracle->add_option("--l", oracle_l, "bridge endpoint (profile)");
  oracle->add_option("--lambda", lambda, "letter weights (partition)")->delimiter(',');
  oracle->add_option("--beta", beta, "inverse temperature (partition)");
  oracle->add_option("--counts", counts, "letter counts (word-count)")->delimiter(',');
  oracle->add_option("--r", r_text, "mean offspring (level-count)");

  auto* check = app.add_subcommand("check", "run the acceptance criteria");
  bool list = false;
  bool as_json = false;
  std::vector<std::string> only;
  std::optional<double> route_tol;
  check->add_flag("--list", list, "print criterion ids without running");
  check->add_option("--only", only, "run only these ids (repeatable)");
  check->add_option("--route-tol", route_tol, "override the route-agreement tolerance");
  check->add_flag("--json", as_json, "machine-readable verdicts on stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    mfbrw::RunConfig cfg = config_path.empty() ? mfbrw::RunConfig{} : mfbrw::load_config(config_path);
    if (out) cfg.out = *out;
    if (seed) cfg.seed = *seed;
    if (threads) cfg.threads = *threads;
    if (rank) cfg.mu.rank = *rank;
    if (identity) cfg.mu.identity = *identity;
    if (!generators.empty()) cfg.mu.generators = generators, cfg.mu.letters.clear();
    if (rank && generators.empty()) cfg.mu.generators.clear(), cfg.mu.letters.clear();
    if (r_text) {
      if (*r_text == "R") {
        cfg.r.reset();
      } else {
        try {
          cfg.r = std::stod(*r_text);
        } catch (const std::exception&) {
          throw mfbrw::Error(mfbrw::Errc::config, "--r: expected a number or R, got '" + *r_text + "'");
        }
      }
    }
    if (q_points) cfg.grids.q_points = *q_points;
    if (s_points) cfg.grids.s_points = *s_points;
    if (alpha_points) cfg.grids.alpha_points = *alpha_points;
    if (sim_n) cfg.simulate.n = *sim_n;
    if (reps) cfg.simulate.replicates = *reps;
    if (rays) cfg.simulate.rays = *rays;
    if (law) cfg.offspring.law = *law;
    if (mean) cfg.offspring.mean = *mean;
    if (kids) cfg.offspring.k = *kids;
    if (no_distinct) cfg.simulate.distinct = false;
    if (kind) cfg.oracle.kind = *kind;
    if (oracle_n) cfg.oracle.n = *oracle_n;
    if (oracle_l) cfg.oracle.l = *oracle_l;
    if (!lambda.empty()) cfg.oracle.lambda = lambda;
    if (beta) cfg.oracle.beta = *beta;
    if (!counts.empty()) cfg.oracle.counts = counts;
    cfg.apply_caps();

    if (*spectrum) {
      const auto res = mfbrw::cmd_spectrum(cfg);
      const auto& s = res.summary;
      const auto f = [](const mfbrw::json& v) { return mfbrw::format_double(v.get<double>()); };
      std::cout << "R = " << f(s["R"]) << ", C_RW = " << f(s["C_RW"]) << ", r = " << f(s["r"]) << "\n"
                << "I(r) = [" << f(s["speed_window"]["lower"]) << ", " << f(s["speed_window"]["upper"]) << "]\n"
                << "alpha(r) = " << f(s["alpha_star"]["alpha"]) << ", dim_H Lambda_r = " << f(s["dim_Lambda"])
                << "\n";
      print_files(res, cfg.out);
    } else if (*simulate) {
      print_files(mfbrw::cmd_simulate(cfg), cfg.out);
    } else if (*oracle) {
      print_files(mfbrw::cmd_oracle(cfg), cfg.out);
    } else if (*check) {
      namespace acc = mfbrw::acceptance;
      if (list) {
        for (const auto& c : acc::registry()) std::cout << c.id << "\t" << c.title << "\n";
        return kExitOk;
      }
      acc::Context ctx;
      if (threads) ctx.threads = *threads;
      ctx.route_tol = route_tol;
      std::vector<const acc::Criterion*> todo;
      if (only.empty()) {
        for (const auto& c : acc::registry()) todo.push_back(&c);
      } else {
        for (const auto& id : only) todo.push_back(&acc::find(id));
      }
      bool all = true;
      mfbrw::json verdicts = mfbrw::json::array();
      for (const auto* c : todo) {
        const auto v = acc::run(*c, ctx);
        all = all && v.pass;
        verdicts.push_back(v.to_json());
        if (!as_json) std::cout << acc::format_line(v) << std::endl;
      }
      if (as_json) std::cout << verdicts.dump(2) << "\n";
      if (out) {
        mfbrw::write_text(std::filesystem::path(*out) / "check.json", mfbrw::dump_json(verdicts));
      }
      return all ? kExitOk : kExitAcceptance;
    }
  } catch (const mfbrw::Error& e) {
    std::cerr << "mfbrw: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "mfbrw: internal error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitOk;
}
