#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "dmis/config.hpp"
#include "dmis/error.hpp"

namespace fs = std::filesystem;
using namespace dmis;

namespace {

struct Outcome {
  int code = -1;
  std::string output;
};

const fs::path& scratch() {
  static const fs::path dir = [] {
    fs::path p = fs::temp_directory_path() / ("dmis-cli-test-" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

Outcome run(const std::string& args) {
  const std::string cmd = "DMIS_OUTPUT_ROOT='" + scratch().string() + "' '" + DMIS_CLI_PATH + "' " + args + " 2>&1";
  Outcome o;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) o.output.append(buf, n);
  const int status = ::pclose(pipe);
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const std::string kSmall =
    "--n-f 400 --n-i 64 --n-b 64 --batch-f 64 --batch-i 32 --batch-b 32 --mesh-size 60 --depth 2 --width 8 "
    "--ref-nx 128 --ref-nt 40";

}  // namespace

TEST_CASE("reference writes a grid once and then reports the cache") {
  const Outcome first = run("reference burgers --nx 128 --nt 40");
  CHECK(first.code == 0);
  const fs::path grid = scratch() / "reference" / "burgers-nx128-nt40.grid";
  CHECK(fs::exists(grid));
  CHECK(slurp(grid).rfind("dmis-grid v1 burgers 128 40 ", 0) == 0);
  const auto stamp = fs::last_write_time(grid);
  const Outcome again = run("reference burgers --nx 128 --nt 40");
  CHECK(again.code == 0);
  CHECK(again.output.find("cached") != std::string::npos);
  CHECK(fs::last_write_time(grid) == stamp);
}

TEST_CASE("coarse KdV reference exits with the numerical code") {
  const Outcome o = run("reference kdv --nx 16");
  CHECK(o.code == kExitNumerical);
  CHECK(o.output.find("nx=16") != std::string::npos);
}

TEST_CASE("zero-iteration DMIS run uses the Burgers table row") {
  const fs::path dir = scratch() / "empty-run";
  const Outcome o = run("train --benchmark burgers --sampler dmis --max-iters 0 --output '" + dir.string() + "'");
  REQUIRE(o.code == 0);
  for (const char* f : {"config.txt", "log.csv", "rebuilds.csv", "curve.csv", "checkpoint.dmis"}) {
    CHECK(fs::exists(dir / f));
  }
  const std::string echo = slurp(dir / "config.txt");
  CHECK(echo.rfind("dmis-config v1\n", 0) == 0);
  for (const char* line : {"learning_rate = 0.005\n", "mesh_size = 1000\n", "gamma = 0.4\n", "beta = 1.5\n",
                           "depth = 3\n", "width = 32\n", "n_f = 100000\n", "sampler = dmis\n"}) {
    CHECK(echo.find(line) != std::string::npos);
  }
  CHECK(slurp(dir / "log.csv") == "iter,L,L_f,L_i,L_b,ms,rebuild\n");
  CHECK(slurp(dir / "rebuilds.csv") == "event,iter,sim,mesh_points\n");
}

TEST_CASE("train, evaluate, and re-evaluate byte-identically") {
  const fs::path dir = scratch() / "small-run";
  REQUIRE(run("train --benchmark burgers --sampler uniform --max-iters 120 " + kSmall + " --output '" + dir.string() +
              "'")
              .code == 0);
  REQUIRE(run("reference burgers --nx 128 --nt 40").code == 0);
  const Outcome ev = run("evaluate '" + dir.string() + "'");
  REQUIRE(ev.code == 0);
  CHECK(ev.output.find("RMSE") != std::string::npos);
  const std::string errors = slurp(dir / "errors.csv");
  const std::string conv = slurp(dir / "convergence.csv");
  CHECK(errors.rfind("segment,me,mae,rmse,count\ntrain,", 0) == 0);
  CHECK(conv.rfind("NC_2,NC_3,NC_4,NC_5,TC_2,TC_3,TC_4,TC_5\n", 0) == 0);
  REQUIRE(run("evaluate '" + dir.string() + "'").code == 0);
  CHECK(slurp(dir / "errors.csv") == errors);
  CHECK(slurp(dir / "convergence.csv") == conv);

  // The echo alone reproduces the run.
  const fs::path again = scratch() / "small-run-again";
  std::string echo = slurp(dir / "config.txt");
  REQUIRE(run("train --config '" + (dir / "config.txt").string() + "' --output '" + again.string() + "'").code == 0);
  CHECK(slurp(again / "checkpoint.dmis") == slurp(dir / "checkpoint.dmis"));
}

TEST_CASE("untrained checkpoint evaluates to large errors") {
  const fs::path dir = scratch() / "init-run";
  REQUIRE(run("train --benchmark burgers --max-iters 0 " + kSmall + " --output '" + dir.string() + "'").code == 0);
  REQUIRE(run("reference burgers --nx 128 --nt 40").code == 0);
  REQUIRE(run("evaluate '" + dir.string() + "'").code == 0);
  std::istringstream errors(slurp(dir / "errors.csv"));
  std::string header, train_row;
  std::getline(errors, header);
  std::getline(errors, train_row);
  const double me = std::stod(train_row.substr(train_row.find(',') + 1));
  CHECK(me > 0.3);
}

TEST_CASE("missing artifacts and bad settings map to their exit codes") {
  CHECK(run("evaluate '" + (scratch() / "nowhere").string() + "'").code == kExitMissingArtifact);
  CHECK(run("train --set no_such_key=1 --max-iters 0").code == kExitConfig);
  CHECK(run("train --sampler sideways --max-iters 0").code == kExitConfig);
  CHECK(run("train --learning-rate abc --max-iters 0").code == kExitConfig);
  CHECK(run("train --config '" + (scratch() / "absent.txt").string() + "'").code == kExitMissingArtifact);
  CHECK(run("frobnicate").code == kExitConfig);
}

TEST_CASE("compare runs every sampler and seed") {
  const fs::path out = scratch() / "cmp";
  const Outcome o = run("compare burgers --seeds 1,2 --samplers uniform,dmis --max-iters 150 " + kSmall + " --out '" +
                        out.string() + "'");
  REQUIRE(o.code == 0);
  const std::string table = slurp(out / "comparison.csv");
  CHECK(table.rfind("sampler,runs,failed,ME,MAE,RMSE,NC_2,NC_3,TC_2,TC_3,status\n", 0) == 0);
  CHECK(table.find("\nuniform,2,0,") != std::string::npos);
  CHECK(table.find("\ndmis,2,0,") != std::string::npos);
  CHECK(std::count(table.begin(), table.end(), '\n') == 3);
  for (const char* run_name : {"uniform-s1", "uniform-s2", "dmis-s1", "dmis-s2"}) {
    const std::string curve = slurp(out / "curves" / (std::string(run_name) + ".csv"));
    CHECK(curve.rfind("iter,L\n0,", 0) == 0);
    CHECK(std::count(curve.begin(), curve.end(), '\n') == 4);  // header + iterations 0, 100, 150
  }
}

TEST_CASE("config echo round trip") {
  RunConfig cfg = table_defaults("kdv");
  apply_setting(cfg, "learning_rate", "0.0003");
  apply_setting(cfg, "sampler", "uniform");
  apply_setting(cfg, "output", "somewhere/else");
  std::ostringstream first;
  write_config(first, cfg);
  std::istringstream in(first.str());
  const RunConfig back = resolve_config(parse_settings(in));
  std::ostringstream second;
  write_config(second, back);
  CHECK(first.str() == second.str());
  CHECK(back.train.adam.learning_rate == 0.0003);
}

TEST_CASE("table rows for every benchmark") {
  const RunConfig s = table_defaults("schrodinger");
  CHECK(s.train.depth == 4);
  CHECK(s.train.width == 64);
  CHECK(s.train.dmis.beta == 2.0);
  CHECK(s.train.n_f == 60000);
  CHECK(s.train.n_i == 200);
  const RunConfig d = table_defaults("diffusion");
  CHECK(d.train.adam.learning_rate == 0.002);
  const RunConfig a = table_defaults("allen-cahn");
  CHECK(a.train.depth == 5);
  CHECK(a.train.dmis.beta == 1.5);
  for (const std::string& b : benchmark_names()) CHECK_NOTHROW(validate(table_defaults(b).train));
}

TEST_CASE("config files reject unknown versions and keys") {
  std::istringstream v2("dmis-config v2\nseed = 1\n");
  CHECK_THROWS_AS(parse_settings(v2), ConfigError);
  std::istringstream junk("seed 1\n");
  CHECK_THROWS_AS(parse_settings(junk), ConfigError);
  RunConfig cfg;
  CHECK_THROWS_AS(apply_setting(cfg, "colour", "red"), ConfigError);
  CHECK_THROWS_AS(apply_setting(cfg, "seed", "-1"), ConfigError);
}
