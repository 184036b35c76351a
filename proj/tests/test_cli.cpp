#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "mfbrw/commands.hpp"
#include "mfbrw/config.hpp"
#include "mfbrw/io.hpp"

using namespace mfbrw;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / "mfbrw_test_cli" / name;
  fs::remove_all(p);
  return p;
}

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::invalid_argument;
}

struct Run {
  int status = -1;
  std::string output;
};

Run cli(const std::string& args) {
  Run r;
  const std::string cmd = std::string(MFBRW_CLI) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  while (fgets(buf, sizeof buf, pipe)) r.output += buf;
  const int st = pclose(pipe);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream s(text);
  for (std::string l; std::getline(s, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST(Config, UnknownKeysAndTypesRejected) {
  EXPECT_EQ(code_of([] { parse_config(json::parse(R"({"mu": {"rank": 2}, "sede": 3})")); }), Errc::config);
  EXPECT_EQ(code_of([] { parse_config(json::parse(R"({"mu": {"rnak": 2}})")); }), Errc::config);
  EXPECT_EQ(code_of([] { parse_config(json::parse(R"({"simulate": {"n": "twenty"}})")); }), Errc::config);
  EXPECT_EQ(code_of([] { parse_config(json::parse(R"({"r": "big"})")); }), Errc::config);
  EXPECT_EQ(code_of([] { validate_config(parse_config(json::parse(R"({"offspring": {"law": "binary", "mean": 2.5}})"))); }),
            Errc::config);
  EXPECT_EQ(code_of([] { validate_config(parse_config(json::parse(R"({"mu": {"identity": 1.5}})"))); }), Errc::config);
  const auto c = parse_config(json::parse(R"({"mu": {"rank": 3, "generators": [0.1, 0.2, 0.2]}, "r": 1.05,
                                              "offspring": {"law": "geometric", "p": 0.3, "K": 5}})"));
  EXPECT_EQ(c.step_distribution().rank(), 3);
  EXPECT_DOUBLE_EQ(*c.r, 1.05);
  EXPECT_NO_THROW(validate_config(c));
  EXPECT_EQ(parse_config(c.to_json()).to_json(), c.to_json());
}

TEST(Config, HashIgnoresThreadsAndOutput) {
  RunConfig a;
  RunConfig b = a;
  b.threads = 7;
  b.out = "elsewhere";
  EXPECT_EQ(a.hash(), b.hash());
  b.seed = 99;
  EXPECT_NE(a.hash(), b.hash());
  EXPECT_EQ(a.hash().size(), 16u);
}

TEST(Io, CsvFormatting) {
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(format_double(0.25), "0.25");
  EXPECT_EQ(format_double(-std::numeric_limits<double>::infinity()), "-inf");
  CsvTable t({"a", "b"});
  t.row().add(1).add(0.5);
  const auto text = t.str({"0123456789abcdef"});
  const auto l = lines(text);
  ASSERT_EQ(l.size(), 3u);
  EXPECT_NE(l[0].find("config=0123456789abcdef"), std::string::npos);
  EXPECT_NE(l[0].find(std::string("version=") + kVersion), std::string::npos);
  EXPECT_EQ(l[1], "a,b");
  EXPECT_EQ(l[2], "1,0.5");
  CsvTable bad({"a", "b"});
  bad.row().add(1);
  EXPECT_THROW(bad.str({}), Error);
}

TEST(Spectrum, CriticalIsotropicSummary) {
  RunConfig cfg;
  cfg.out = scratch("spectrum").string();
  cfg.grids.q_points = 11;
  cfg.grids.s_points = 41;
  cfg.grids.alpha_points = 6;
  const auto res = cmd_spectrum(cfg);
  EXPECT_NEAR(res.summary["dim_Lambda"].get<double>(), 0.5 * std::log(3.0), 1e-6);
  EXPECT_NEAR(res.summary["R"].get<double>(), 2.0 / std::sqrt(3.0), 1e-12);
  EXPECT_TRUE(validate_summary(res.summary).empty());
  // Round trip through the file.
  const auto disk = json::parse(read_text(fs::path(cfg.out) / "summary.json"));
  EXPECT_TRUE(validate_summary(disk).empty());
  EXPECT_EQ(disk, res.summary);
  auto broken = disk;
  broken.erase("R");
  broken["extra"] = 1;
  broken["schema"] = "mfbrw/0";
  EXPECT_EQ(validate_summary(broken).size(), 3u);
  for (const auto& f : res.files) {
    if (f.ends_with(".csv")) {
      EXPECT_EQ(lines(read_text(fs::path(cfg.out) / f))[0].find("# mfbrw/1"), 0u) << f;
    }
  }
  const auto manifest = json::parse(read_text(fs::path(cfg.out) / "manifest.json"));
  EXPECT_TRUE(manifest.contains("started"));
  EXPECT_EQ(manifest["config_hash"], cfg.hash());
}

TEST(Spectrum, OutOfPhaseIsAConfigError) {
  RunConfig cfg;
  cfg.out = scratch("phase").string();
  for (double r : {1.5, 1.0, 0.7}) {
    cfg.r = r;
    try {
      cmd_spectrum(cfg);
      ADD_FAILURE() << r;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::config);
      EXPECT_NE(std::string(e.what()).find("transient phase"), std::string::npos);
    }
  }
}

TEST(Oracle, LengthDistributionRow) {
  RunConfig cfg;
  cfg.out = scratch("oracle").string();
  cfg.oracle.kind = "length-dist";
  cfg.oracle.n = 2;
  cmd_oracle(cfg);
  const auto l = lines(read_text(fs::path(cfg.out) / "length_distribution.csv"));
  ASSERT_GE(l.size(), 3u);
  EXPECT_EQ(l[1], "m,probability,log_probability");
  EXPECT_EQ(l[2].substr(0, 7), "0,0.25,");
}

TEST(Oracle, OtherKinds) {
  RunConfig cfg;
  cfg.out = scratch("oracle_kinds").string();
  for (const char* kind : {"profile", "partition", "word-count", "level-count"}) {
    cfg.oracle.kind = kind;
    cfg.oracle.n = 20;
    cfg.oracle.counts = {2, 1, 1, 0};
    EXPECT_NO_THROW(cmd_oracle(cfg)) << kind;
  }
  const auto l = lines(read_text(fs::path(cfg.out) / "word_count.csv"));
  // two a, one A, one b: only aabA and Abaa are reduced
  EXPECT_EQ(l[1], "count,overflow,log_count");
  EXPECT_EQ(l[2].substr(0, 4), "2,0,");
}

TEST(Simulate, ByteIdenticalAcrossRunsAndWorkers) {
  RunConfig cfg;
  cfg.offspring.law = "binary";
  cfg.offspring.mean = 1.8;
  cfg.simulate.n = 10;
  cfg.simulate.replicates = 12;
  cfg.simulate.rays = 50;
  std::vector<std::string> texts;
  for (int t : {1, 1, 4}) {
    cfg.threads = t;
    cfg.out = scratch("sim" + std::to_string(texts.size())).string();
    const auto res = cmd_simulate(cfg);
    std::string all;
    for (const auto& f : res.files) {
      if (f.ends_with(".csv")) all += read_text(fs::path(cfg.out) / f);
    }
    texts.push_back(all);
  }
  EXPECT_EQ(texts[0], texts[1]);
  EXPECT_EQ(texts[0], texts[2]);
}

TEST(Simulate, LevelRateColumns) {
  RunConfig cfg;
  cfg.offspring.law = "binary";
  cfg.offspring.mean = 1.8;
  cfg.simulate.n = 20;
  cfg.simulate.replicates = 3;
  cfg.simulate.rays = 0;
  cfg.simulate.distinct = false;
  cfg.out = scratch("sim_rates").string();
  cmd_simulate(cfg);
  const auto l = lines(read_text(fs::path(cfg.out) / "level_summary.csv"));
  EXPECT_EQ(l[1], "m,mean_N,se_N,expected_N,z,empirical_rate,analytic_rate,gap");
  EXPECT_EQ(l.size(), 2u + 21u);
  cfg.r = 1.7;
  EXPECT_EQ(code_of([&] { cmd_simulate(cfg); }), Errc::config);
}

TEST(Cli, HelpListAndExitCodes) {
  const auto help = cli("--help");
  EXPECT_EQ(help.status, 0);
  EXPECT_NE(help.output.find("MFBRW_NODE_CAP"), std::string::npos);
  const auto list = cli("check --list");
  EXPECT_EQ(list.status, 0);
  EXPECT_NE(list.output.find("AC1\t"), std::string::npos);
  EXPECT_NE(list.output.find("AC15\t"), std::string::npos);
  EXPECT_EQ(list.output.find("PASS"), std::string::npos);

  const auto dir = scratch("cli");
  EXPECT_EQ(cli("spectrum --r 1.5 --out " + dir.string()).status, 2);
  EXPECT_EQ(cli("simulate --bogus").status, 2);
  fs::create_directories(dir);
  write_text(dir / "bad.json", R"({"mu": {"rank": 2}, "colour": "red"})");
  const auto bad = cli("--config " + (dir / "bad.json").string() + " oracle");
  EXPECT_EQ(bad.status, 2);
  EXPECT_NE(bad.output.find("colour"), std::string::npos);

  const auto ok = cli("--out " + (dir / "o").string() + " oracle length-dist --n 2");
  EXPECT_EQ(ok.status, 0) << ok.output;

  const auto pass = cli("check --only AC1");
  EXPECT_EQ(pass.status, 0) << pass.output;
  EXPECT_EQ(pass.output.rfind("PASS AC1", 0), 0u);
}

TEST(Cli, ForcedRouteFailure) {
  const auto r = cli("check --only AC5 --only AC7 --route-tol 1e-15");
  EXPECT_EQ(r.status, 3);
  EXPECT_NE(r.output.find("FAIL AC7"), std::string::npos);
  EXPECT_NE(r.output.find("fixed point"), std::string::npos);  // both values printed
}
