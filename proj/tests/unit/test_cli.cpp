// Drives the skillrate executable end to end.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "../synthetic.hpp"
#include "doctest.h"
#include "skillrate/ingest.hpp"

namespace fs = std::filesystem;

#ifndef SKILLRATE_CLI
#error "SKILLRATE_CLI must name the executable"
#endif

namespace {

const fs::path& workdir() {
  static const fs::path d = [] {
    const fs::path p = fs::temp_directory_path() / "skillrate_cli_test";
    fs::remove_all(p);
    fs::create_directories(p);
    synth::Config c;
    c.players = 8;
    c.matches = 240;
    c.days = 700;
    c.seed = 13;
    skillrate::MatchStream s = synth::generate(c).stream;
    s.origin_day = 18262;  // 2020-01-01
    std::ofstream out(p / "matches.csv");
    skillrate::write_csv(out, s);
    return p;
  }();
  return d;
}

int run(const std::string& args) {
  const std::string cmd = std::string(SKILLRATE_CLI) + " " + args + " > " + (workdir() / "stdout.txt").string() + " 2> " +
                          (workdir() / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string data() { return "--data " + (workdir() / "matches.csv").string(); }
std::string out(const std::string& name) { return "--out " + (workdir() / name).string(); }

std::vector<std::vector<std::string>> csv_rows(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) rows.push_back(skillrate::split_csv_line(line));
  return rows;
}

std::map<std::string, std::string> params(const fs::path& p) {
  std::map<std::string, std::string> kv;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

}  // namespace

TEST_CASE("exit codes") {
  CHECK(run("") != 0);
  CHECK(run("rate --method ek --data /nonexistent.csv") == 2);
  CHECK(run("rate --method nope " + data()) == 2);
  CHECK(run("rate --method ek --set tau=abc " + data()) == 2);
  CHECK(run("smooth --method elo " + data() + " " + out("x")) == 2);
  CHECK(run("rate --method ts2 --sigmoid logistic " + data()) == 2);
  CHECK(run("rate --method ek " + data() + " " + out("draws")) == 2);
  CHECK(run("rate --method ek --set epsilon=0.3 " + data() + " " + out("ok")) == 0);
  CHECK(fs::exists(workdir() / "ok" / "ratings.csv"));
}

TEST_CASE("one-point grid is echoed") {
  REQUIRE(run("fit --method elo --grid-p1 0.07 --grid-p2 0.4 " + data() + " " + out("grid")) == 0);
  const auto kv = params(workdir() / "grid" / "params.kv");
  CHECK(std::stod(kv.at("k")) == 0.07);
  CHECK(std::stod(kv.at("kappa")) == 0.4);
  CHECK(csv_rows(workdir() / "grid" / "grid.csv").size() == 2);
}

TEST_CASE("reruns are byte-identical") {
  for (const char* m : {"smc", "discrete"}) {
    const std::string common = std::string("fit --method ") + m + " --particles 100 --states 30 --max-iters 3 --seed 5 " + data();
    REQUIRE(run(common + " " + out("a")) == 0);
    REQUIRE(run(common + " " + out("b")) == 0);
    CHECK(slurp(workdir() / "a" / "params.kv") == slurp(workdir() / "b" / "params.kv"));
    CHECK(slurp(workdir() / "a" / "em_trace.csv") == slurp(workdir() / "b" / "em_trace.csv"));
    const std::string sm = std::string("smooth --method ") + m + " --params " + (workdir() / "a" / "params.kv").string() + " " + data();
    REQUIRE(run(sm + " --threads 1 " + out("sa")) == 0);
    REQUIRE(run(sm + " --threads 2 " + out("sb")) == 0);
    CHECK(slurp(workdir() / "sa" / "smooth.csv") == slurp(workdir() / "sb" / "smooth.csv"));
  }
}

TEST_CASE("fit then evaluate replays the final NLL") {
  for (const char* m : {"ek", "ts2", "smc", "discrete"}) {
    CAPTURE(m);
    const std::string dir = std::string("fit_") + m;
    REQUIRE(run(std::string("fit --method ") + m + " --particles 100 --states 30 --max-iters 4 " + data() + " " + out(dir)) == 0);
    const auto trace = csv_rows(workdir() / dir / "em_trace.csv");
    const double fit_nll = std::stod(trace.back().back());
    REQUIRE(run("evaluate --train-only --params " + (workdir() / dir / "params.kv").string() + " " + data() + " " + out(dir)) == 0);
    const auto report = csv_rows(workdir() / dir / "report.csv");
    REQUIRE(report.size() == 2);
    CHECK(std::abs(std::stod(report[1][6]) - fit_nll) < 1e-9);
  }
}

TEST_CASE("fixtures") {
  {
    std::ofstream f(workdir() / "fixtures.csv");
    f << "date,home,away\n2022-06-01,new1,new2\n2022-06-01,p1,p2\n";
  }
  const std::map<std::string, std::string> extra = {{"elo", "--set kappa=0.5"},
                                                    {"ek", "--set epsilon=0.3"},
                                                    {"ts2", "--set epsilon=0.3"},
                                                    {"smc", "--set epsilon=0.3 --particles 200"},
                                                    {"discrete", "--states 30 --set epsilon_d=2"}};
  for (const auto& [m, args] : extra) {
    CAPTURE(m);
    REQUIRE(run("predict --method " + m + " " + args + " --fixtures " + (workdir() / "fixtures.csv").string() + " " + data() + " " +
                out("pred_" + m)) == 0);
    const auto rows = csv_rows(workdir() / ("pred_" + m) / "predictions.csv");
    REQUIRE(rows.size() == 3);
    CHECK(rows[0] == std::vector<std::string>{"date", "home", "away", "p_home", "p_away", "p_draw", "home_unknown", "away_unknown"});
    CHECK(rows[1][3] == rows[1][4]);
    CHECK(rows[1][6] == "1");
    for (std::size_t r = 1; r < 3; ++r)
      CHECK(std::abs(std::stod(rows[r][3]) + std::stod(rows[r][4]) + std::stod(rows[r][5]) - 1.0) < 1e-9);
  }
}
