#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kCli = MELTPOOL_CLI_PATH;

struct RunOutput {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

RunOutput run_cli(const std::string& args) {
  const fs::path log = fs::temp_directory_path() / "meltpool_cli_test.log";
  const std::string cmd = kCli + " " + args + " > " + log.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  RunOutput out;
  out.exit_code = WEXITSTATUS(rc);
  std::ifstream in(log);
  std::ostringstream ss;
  ss << in.rdbuf();
  out.output = ss.str();
  return out;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "meltpool_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_config(const fs::path& dir, const std::string& name, const json& j) {
  const fs::path p = dir / name;
  std::ofstream(p) << j.dump(2);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json simulate_config(const fs::path& out_dir) {
  json j;
  j["seed"] = 7;
  j["output_dir"] = out_dir.string();
  j["P_W"] = 250.0;
  j["V_mm_s"] = 1000.0;
  j["dx_um"] = 10.0;
  j["track_length_um"] = 200.0;
  j["hyper"] = {{"mu", {4.17e-7, 1.167e-3, 2.08e-7}},
                {"L", {2e-8, 0.0, 5e-5, 0.0, 0.0, 1e-8}}};
  return j;
}

}  // namespace

TEST_CASE("usage errors exit with code 1") {
  CHECK(run_cli("").exit_code == 1);
  CHECK(run_cli("frobnicate config.json").exit_code == 1);
  CHECK(run_cli("simulate").exit_code == 1);  // missing config argument
}

TEST_CASE("validate") {
  const fs::path dir = fresh_dir("validate");

  SUBCASE("a good config passes") {
    const auto cfg = write_config(dir, "ok.json", simulate_config(dir / "out"));
    const RunOutput r = run_cli("validate --command simulate " + cfg.string());
    CHECK(r.exit_code == 0);
  }

  SUBCASE("a missing seed is reported by name") {
    json j = simulate_config(dir / "out");
    j.erase("seed");
    const auto cfg = write_config(dir, "noseed.json", j);
    const RunOutput r = run_cli("validate --command simulate " + cfg.string());
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("seed") != std::string::npos);
  }

  SUBCASE("a speed that looks like m/s warns") {
    json j = simulate_config(dir / "out");
    j["V_mm_s"] = 1.0;
    const auto cfg = write_config(dir, "slow.json", j);
    const RunOutput r = run_cli("validate --command simulate " + cfg.string());
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("warning") != std::string::npos);
  }

  SUBCASE("a nonexistent config exits with code 2") {
    CHECK(run_cli("validate --command simulate /no/such/config.json").exit_code == 2);
  }

  SUBCASE("malformed JSON exits with code 2") {
    const fs::path p = dir / "broken.json";
    std::ofstream(p) << "{ not json";
    CHECK(run_cli("validate --command simulate " + p.string()).exit_code == 2);
  }
}

TEST_CASE("simulate produces deterministic artifacts") {
  const fs::path out = fresh_dir("simulate_out");
  const fs::path dir = fresh_dir("simulate_cfg");
  const auto cfg = write_config(dir, "sim.json", simulate_config(out));

  REQUIRE(run_cli("simulate " + cfg.string()).exit_code == 0);
  REQUIRE(fs::exists(out / "trace.csv"));
  REQUIRE(fs::exists(out / "report.json"));
  const std::string trace1 = slurp(out / "trace.csv");
  const std::string report1 = slurp(out / "report.json");
  CHECK(trace1.rfind("# config_hash=", 0) == 0);
  CHECK(trace1.find("seed=7") != std::string::npos);

  // Re-running the identical config reproduces every byte.
  REQUIRE(run_cli("simulate " + cfg.string()).exit_code == 0);
  CHECK(slurp(out / "trace.csv") == trace1);
  CHECK(slurp(out / "report.json") == report1);

  const json report = json::parse(report1);
  CHECK(report["melted"].get<bool>());
  CHECK(report["width_m"].get<double>() > 20e-6);
  CHECK(report["width_m"].get<double>() < 300e-6);
  CHECK(report["depth_m"].get<double>() > 10e-6);
}

TEST_CASE("zero covariance makes the run seed-independent") {
  const fs::path dir = fresh_dir("zero_cov");
  json a = simulate_config(dir / "a");
  a["hyper"]["L"] = {0, 0, 0, 0, 0, 0};
  json b = a;
  b["output_dir"] = (dir / "b").string();
  b["seed"] = 12345;

  const auto ca = write_config(dir, "a.json", a);
  const auto cb = write_config(dir, "b.json", b);
  REQUIRE(run_cli("simulate " + ca.string()).exit_code == 0);
  REQUIRE(run_cli("simulate " + cb.string()).exit_code == 0);

  const json ra = json::parse(slurp(dir / "a" / "report.json"));
  const json rb = json::parse(slurp(dir / "b" / "report.json"));
  CHECK(ra["width_m"].get<double>() == rb["width_m"].get<double>());
  CHECK(ra["depth_m"].get<double>() == rb["depth_m"].get<double>());

  // A nonzero covariance at different seeds must not collapse to one answer.
  json c = simulate_config(dir / "c");
  json d = c;
  d["output_dir"] = (dir / "d").string();
  d["seed"] = 99;
  REQUIRE(run_cli("simulate " + write_config(dir, "c.json", c).string()).exit_code == 0);
  REQUIRE(run_cli("simulate " + write_config(dir, "d.json", d).string()).exit_code == 0);
  const json rc = json::parse(slurp(dir / "c" / "report.json"));
  const json rd = json::parse(slurp(dir / "d" / "report.json"));
  CHECK(rc["width_m"].get<double>() != rd["width_m"].get<double>());
}

TEST_CASE("predict flags lack of fusion for an oversized hatch") {
  const fs::path out = fresh_dir("predict_out");
  const fs::path dir = fresh_dir("predict_cfg");
  json j;
  j["seed"] = 3;
  j["output_dir"] = out.string();
  j["P_W"] = 250.0;
  j["V_mm_s"] = 1000.0;
  j["dx_um"] = 10.0;
  j["track_length_um"] = 200.0;
  j["n_tracks"] = 3;
  j["hatch_um"] = 250.0;  // ~3x the single-track width: gaps must remain
  j["n_zones"] = 5;
  j["hyper"] = {{"mu", {4.17e-7, 1.167e-3, 2.08e-7}},
                {"L", {0, 0, 0, 0, 0, 0}}};
  const auto cfg = write_config(dir, "predict.json", j);

  REQUIRE(run_cli("predict " + cfg.string()).exit_code == 0);
  const json q = json::parse(slurp(out / "quality.json"));
  CHECK(q["porosity_mean"].get<double>() > 0.0);
  CHECK(q["Sa_mean"].get<double>() > 0.0);
  CHECK(q["VED"].get<double>() > 0.0);
  CHECK(q["NED"].get<double>() > 0.0);
  CHECK(fs::exists(out / "heights.csv"));
  CHECK(fs::exists(out / "trace.csv"));
}

TEST_CASE("sample writes a reproducible chain") {
  const fs::path out = fresh_dir("sample_out");
  const fs::path dir = fresh_dir("sample_cfg");
  json j;
  j["seed"] = 11;
  j["output_dir"] = out.string();
  j["n_steps"] = 2000;
  j["hyper"] = {{"mu", {4.17e-7, 1.167e-3, 2.08e-7}},
                {"L", {2e-8, 0.0, 5e-5, 0.0, 0.0, 1e-8}}};
  const auto cfg = write_config(dir, "sample.json", j);

  REQUIRE(run_cli("sample " + cfg.string()).exit_code == 0);
  const std::string chain1 = slurp(out / "chain.csv");
  CHECK(chain1.find("P1,P2,P3") != std::string::npos);
  REQUIRE(run_cli("sample " + cfg.string()).exit_code == 0);
  CHECK(slurp(out / "chain.csv") == chain1);
}
