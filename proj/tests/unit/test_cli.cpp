#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"

namespace fs = std::filesystem;
using namespace spheresel;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "spheresel");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("spheresel-cli-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const std::vector<std::string> kQuick{"--intervals", "20000", "--batch-size", "20000",
                                      "--max-batches", "3", "--threads", "1"};

std::vector<std::string> with_quick(std::vector<std::string> args) {
  args.insert(args.end(), kQuick.begin(), kQuick.end());
  return args;
}

std::vector<std::string> data_lines(const std::string& text) {
  std::vector<std::string> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#') rows.push_back(line);
  }
  return rows;
}

}  // namespace

TEST_CASE("eta-table writes one deterministic file per k", "[cli]") {
  const auto dir = scratch("eta");
  auto r = invoke({"eta-table", "--k", "2", "--alpha", "0.1", "--out-dir", dir.string()});
  REQUIRE(r.code == 0);
  const auto file = dir / "eta_k2_a0.1.csv";
  const auto rows = data_lines(slurp(file));
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].rfind("2,0.10000000000000001,2,1.609438,", 0) == 0);
  const auto first = slurp(file);
  REQUIRE(invoke({"eta-table", "--k", "2", "--alpha", "0.1", "--out-dir", dir.string()}).code == 0);
  CHECK(slurp(file) == first);

  r = invoke(with_quick({"eta-table", "--k", "3,4", "--out-dir", dir.string(), "--print-table"}));
  REQUIRE(r.code == 0);
  CHECK(r.out.find("|I|\tk=4\tk=3") != std::string::npos);
  CHECK(fs::exists(dir / "eta_k4_a0.1.csv"));
}

TEST_CASE("run validates pairings and schedules", "[cli]") {
  const auto dir = scratch("run");
  auto r = invoke(with_quick({"run", "--scenario", "SC-INC", "--procedure", "DK1", "--k", "4",
                              "--reps", "10", "--cache-dir", dir.string()}));
  CHECK(r.code == 2);
  REQUIRE(invoke({"eta-table", "--k", "2", "--out-dir", dir.string()}).code == 0);
  r = invoke({"run", "--k", "3", "--procedure", "DK1", "--reps", "10", "--schedule",
              (dir / "eta_k2_a0.1.csv").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("schedule") != std::string::npos);
  CHECK(invoke({"run", "--procedure", "BIZ", "--k", "3"}).code == 2);
  CHECK(invoke({"run", "--bogus-flag"}).code == 2);
  CHECK(invoke({}).code == 2);
}

TEST_CASE("run appends results with the effective configuration", "[cli]") {
  const auto dir = scratch("results");
  const auto out = dir / "results.csv";
  const auto profile = dir / "levels.csv";
  auto args = with_quick({"run", "--k", "4", "--procedure", "DK1", "--reps", "50",
                          "--cache-dir", (dir / "cache").string(), "--out", out.string(),
                          "--level-profile", profile.string()});
  REQUIRE(invoke(args).code == 0);
  REQUIRE(invoke(args).code == 0);
  const auto text = slurp(out);
  const auto rows = data_lines(text);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == "scenario,procedure,k,alpha,delta,n0,macro_reps,pcs,pcs_se,rep_per_k,seed");
  CHECK(rows[1] == rows[2]);
  CHECK(text.find("# reps=50") != std::string::npos);
  CHECK(data_lines(slurp(profile)).size() == 4);
  CHECK(fs::directory_iterator(dir / "cache") != fs::directory_iterator());
}

TEST_CASE("replay reproduces a recorded run", "[cli]") {
  const auto dir = scratch("replay");
  const auto rec = dir / "obs.csv";
  for (const char* proc : {"DK1", "DK3", "KN-UNK"}) {
    auto common = with_quick({"run", "--k", "4", "--procedure", proc, "--n0", "5", "--rep", "3",
                              "--cache-dir", (dir / "cache").string()});
    auto record = common;
    record.insert(record.end(), {"--record", rec.string()});
    auto replay = common;
    replay.insert(replay.end(), {"--replay", rec.string()});
    const auto a = invoke(record);
    const auto b = invoke(replay);
    INFO(proc << ": " << a.err << b.err);
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    CHECK(a.out == b.out);
    CHECK(a.out.rfind("selected,total_observations,stages,eliminations\n", 0) == 0);
  }
  std::ofstream(dir / "short.csv") << "system_id,index,value\n1,1,0.5\n";
  const auto r = invoke(with_quick({"run", "--k", "4", "--procedure", "DK1", "--cache-dir",
                                    (dir / "cache").string(), "--replay",
                                    (dir / "short.csv").string()}));
  CHECK(r.code == 4);
}

TEST_CASE("sweep covers the cross product", "[cli]") {
  const auto dir = scratch("sweep");
  const auto out = dir / "sweep.csv";
  auto args = with_quick({"sweep", "--k", "2,4,8", "--procedure", "DK1,KN", "--reps", "20",
                          "--cache-dir", (dir / "cache").string(), "--out", out.string()});
  REQUIRE(invoke(args).code == 0);
  const auto first = slurp(out);
  CHECK(data_lines(first).size() == 7);
  REQUIRE(invoke(args).code == 0);
  CHECK(slurp(out) == first);

  auto bad = with_quick({"sweep", "--scenario", "SC-INC", "--k", "3", "--procedure", "DK1,DK3",
                         "--reps", "5", "--cache-dir", (dir / "cache").string()});
  const auto r = invoke(bad);
  CHECK(r.code == 2);
  CHECK(data_lines(r.out).size() == 2);
}

TEST_CASE("configuration file sits between flags and defaults", "[cli]") {
  const auto dir = scratch("config");
  const auto cfg = dir / "spheresel.conf";
  std::ofstream(cfg) << "alpha=0.2\nreps=30\nscenario=\"MDM-Equal\"\n";
  auto r = invoke(with_quick({"run", "--config", cfg.string(), "--k", "3", "--procedure", "KN"}));
  REQUIRE(r.code == 0);
  auto rows = data_lines(r.out);
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].rfind("MDM-Equal,KN,3,0.20000000000000001,1,1,30,", 0) == 0);
  r = invoke(with_quick({"run", "--config", cfg.string(), "--k", "3", "--procedure", "KN",
                         "--reps", "40"}));
  rows = data_lines(r.out);
  CHECK(rows[1].find(",40,") != std::string::npos);
}

TEST_CASE("oracle report", "[cli]") {
  const auto r = invoke({"oracle", "--k", "3", "--eta", "0.05", "--reps", "2000", "--mc-samples",
                         "20000", "--intervals", "20000"});
  REQUIRE(r.code == 0);
  for (const char* key : {"oracle:", "exact_mc:", "asymptotic:", "seed:", "mc_key:"}) {
    CHECK(r.out.find(key) != std::string::npos);
  }
  CHECK(invoke({"oracle", "--k", "8", "--eta", "1"}).code == 2);
  CHECK(invoke({"oracle", "--k", "3"}).code == 2);
}
