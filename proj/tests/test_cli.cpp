#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / ("ncgl_cli_" + tag + "_" + std::to_string(std::rand()))) {
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(NCGL_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

}  // namespace

TEST_CASE("enumerate reports the exact probability of a tiny graph") {
  TempDir dir("enum");
  REQUIRE(run("ssbm enumerate --N 4 --p 0.5 --q 0.1 --out " + dir.path.string(), dir.path / "log") == 0);
  const auto j = read_json(dir.path / "enumerate.json");
  CHECK(j.at("total").get<std::uint64_t>() == 64);
  CHECK(j.at("exhaustive").get<bool>());
  CHECK(j.at("probability").get<double>() > 0.0);
  CHECK(slurp(dir.path / "log").find("condition C probability") != std::string::npos);
}

TEST_CASE("bound on the worked example") {
  TempDir dir("bound");
  REQUIRE(run("ssbm bound --preset paper-example --out " + dir.path.string(), dir.path / "log") == 0);
  CHECK(read_json(dir.path / "bound.json").at("log10_bound").get<double>() == doctest::Approx(-1139.77).epsilon(1e-5));
}

TEST_CASE("reruns are byte identical") {
  TempDir a("rerun_a"), b("rerun_b");
  const std::string args = "ssbm sample --N 40 --p 0.3 --q 0.05 --count 2 --seed 5 --out ";
  REQUIRE(run(args + a.path.string(), a.path / "log") == 0);
  REQUIRE(run(args + b.path.string() + " --threads 2", b.path / "log") == 0);
  CHECK(slurp(a.path / "graph_1.json") == slurp(b.path / "graph_1.json"));
  CHECK(!slurp(a.path / "graph_1.json").empty());

  const std::string mc = "ssbm mc-prob --N 6 --p 0.6 --q 0.2 --trials 2000 --seed 3 --out ";
  REQUIRE(run(mc + a.path.string() + " --threads 1", a.path / "log") == 0);
  REQUIRE(run(mc + b.path.string() + " --threads 3", b.path / "log") == 0);
  CHECK(slurp(a.path / "mc.json") == slurp(b.path / "mc.json"));
}

TEST_CASE("graph files round trip through the condition check") {
  TempDir dir("check");
  REQUIRE(run("ssbm make-cplus --N 20 --p 0.5 --q 0.1 --out " + dir.path.string(), dir.path / "log") == 0);
  REQUIRE(run("ssbm check-c --graph " + (dir.path / "cplus.json").string() + " --out " + dir.path.string(),
              dir.path / "log") == 0);
  CHECK(read_json(dir.path / "condition_c.json").at("holds").get<bool>());
}

TEST_CASE("bad input exits nonzero") {
  TempDir dir("bad");
  const fs::path cfg = dir.path / "bad.json";
  std::ofstream(cfg) << R"({"preset": "d1", "unknown_key": 1})";
  CHECK(run("gnn train --config " + cfg.string() + " --out " + dir.path.string(), dir.path / "log") != 0);
  CHECK(slurp(dir.path / "log").find("unknown field unknown_key") != std::string::npos);
  CHECK(run("ssbm bound --N 10 --p 0.5 --out " + dir.path.string(), dir.path / "log") != 0);
  CHECK(run("no-such-command", dir.path / "log") != 0);
}
