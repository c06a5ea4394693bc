#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "fowler/cli.hpp"
#include "fowler/io.hpp"

using namespace fowler;
namespace fs = std::filesystem;
using io::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::initializer_list<std::string> args) {
  std::vector<std::string> store{"fowler_lab"};
  store.insert(store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : store) argv.push_back(s.c_str());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("fowler_cli_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("cylinder and solve-kl print the closed forms") {
  auto r = run({"cylinder", "--N", "3", "--mu1", "1", "--mu2", "1", "--beta", "1"});
  REQUIRE(r.code == kExitOk);
  auto j = json::parse(r.out);
  CHECK(io::number_from(j.at("K")) == doctest::Approx(-0.0589256).epsilon(1e-6));
  CHECK(io::number_from(j.at("C1")) == doctest::Approx(0.594604).epsilon(1e-6));
  CHECK(j.at("schema_version") == io::kSchemaVersion);

  r = run({"solve-kl", "--N", "4", "--mu1", "1", "--mu2", "1", "--beta", "2"});
  REQUIRE(r.code == kExitOk);
  j = json::parse(r.out);
  CHECK(io::number_from(j.at("k")) == doctest::Approx(0.577350).epsilon(1e-6));
  CHECK(io::number_from(j.at("l")) == doctest::Approx(0.577350).epsilon(1e-6));

  r = run({"bubble", "--N", "3"});
  REQUIRE(r.code == kExitOk);
  j = json::parse(r.out);
  CHECK(io::number_from(j.at("U0")) == doctest::Approx(std::pow(3.0, 0.25)));
}

TEST_CASE("domain errors exit 1 and name the precondition") {
  auto r = run({"integrate", "--N", "2"});
  CHECK(r.code == kExitDomain);
  CHECK(r.err.find("N must be >= 3") != std::string::npos);

  r = run({"integrate", "--N", "2", "--json-errors"});
  CHECK(r.code == kExitDomain);
  auto j = json::parse(r.err);
  CHECK(j.at("error").at("kind") == "DomainError");
  CHECK(j.at("error").at("exit_code") == kExitDomain);

  CHECK(run({"solve-kl", "--N", "4", "--mu1", "1", "--mu2", "2", "--beta", "1.5"}).code == kExitDomain);
  CHECK(run({"integrate", "--mode", "sideways"}).code == kExitDomain);
  CHECK(run({"frobnicate"}).code == kExitDomain);
  CHECK(run({}).code == kExitDomain);
  CHECK(run({"integrate", "--beta", "-1"}).code == kExitDomain);
}

TEST_CASE("io failures exit 3") {
  TempDir tmp;
  CHECK(run({"classify", "--input", tmp.file("nope.json")}).code == kExitIo);
  write(tmp.file("bad.json"), "{\"schema_version\": 1, \"params\": ");
  CHECK(run({"classify", "--input", tmp.file("bad.json")}).code == kExitIo);
  write(tmp.file("cfg.json"), R"({"params": {"N": 3}, "colour": "blue"})");
  auto r = run({"cylinder", "--config", tmp.file("cfg.json"), "--json-errors"});
  CHECK(r.code == kExitIo);
  CHECK(json::parse(r.err).at("error").at("kind") == "SchemaMismatch");
}

TEST_CASE("integrate writes a loadable trajectory and CSV") {
  TempDir tmp;
  auto r = run({"integrate", "--initial", "cylinder", "--t-min", "-5", "--t-max", "5", "--out",
                tmp.file("traj.json"), "--csv", tmp.file("traj.csv"), "--with-reports"});
  REQUIRE(r.code == kExitOk);
  auto tr = io::load_trajectory(tmp.file("traj.json"));
  CHECK(tr.t_begin() == -5);
  CHECK(tr.t_end() == 5);
  CHECK(io::read_json(tmp.file("traj.json")).at("reports").at("classification").at("verdict") ==
        "BothSingularCandidate");
  std::ifstream csv(tmp.file("traj.csv"));
  std::string header;
  std::getline(csv, header);
  CHECK(header == "t,w1,w2,dw1,dw2,psi");

  r = run({"classify", "--input", tmp.file("traj.json")});
  REQUIRE(r.code == kExitOk);
  CHECK(json::parse(r.out).at("verdict") == "BothSingularCandidate");

  r = run({"invariants", "--input", tmp.file("traj.json")});
  REQUIRE(r.code == kExitOk);
  CHECK(json::parse(r.out).at("report").at("all_pass") == true);

  r = run({"plot-data", "--input", tmp.file("traj.json"), "--per-step", "2"});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.rfind("t,w1,w2,psi,f1,f2,r,u,v\n", 0) == 0);
}

TEST_CASE("output directory from the environment") {
  TempDir tmp;
  ::setenv("FOWLER_OUTPUT_DIR", tmp.path.c_str(), 1);
  auto r = run({"cylinder", "--out", "sub/cyl.json"});
  ::unsetenv("FOWLER_OUTPUT_DIR");
  REQUIRE(r.code == kExitOk);
  CHECK(fs::exists(tmp.path / "sub" / "cyl.json"));
}

TEST_CASE("flags override the config file") {
  TempDir tmp;
  write(tmp.file("cfg.json"), R"({"params": {"N": 4, "mu1": 1, "mu2": 1, "beta": 2},
                                  "settings": {"t_min": -3, "t_max": 3}})");
  auto r = run({"solve-kl", "--config", tmp.file("cfg.json")});
  REQUIRE(r.code == kExitOk);
  CHECK(json::parse(r.out).at("params").at("N") == 4);

  r = run({"solve-kl", "--config", tmp.file("cfg.json"), "--N", "3", "--beta", "1"});
  REQUIRE(r.code == kExitOk);
  auto j = json::parse(r.out);
  CHECK(j.at("params").at("N") == 3);
  CHECK(io::number_from(j.at("k")) == doctest::Approx(std::pow(2.0, -0.25)));

  r = run({"integrate", "--config", tmp.file("cfg.json"), "--t-max", "4", "--initial", "cylinder"});
  REQUIRE(r.code == kExitOk);
  j = json::parse(r.out);
  CHECK(io::number_from(j.at("settings").at("t_min")) == -3);
  CHECK(io::number_from(j.at("settings").at("t_max")) == 4);
}

TEST_CASE("experiments through the command line") {
  auto r = run({"sign-change", "--N", "3", "--runs", "10", "--seed", "4"});
  REQUIRE(r.code == kExitOk);
  auto j = json::parse(r.out);
  CHECK(j.at("n_runs") == 10);
  CHECK(j.at("counts").at("SignChanging") == 10);

  r = run({"sign-change", "--a1", "0.5", "--a2", "0.5", "--b1", "0.3", "--b2", "-0.3"});
  REQUIRE(r.code == kExitOk);
  CHECK(json::parse(r.out).at("n_runs") == 1);

  r = run({"search-semi", "--N", "5", "--beta", "0.5", "--runs", "5", "--seed", "1"});
  REQUIRE(r.code == kExitOk);
  j = json::parse(r.out);
  CHECK(j.at("counts").count("SemiSingularCandidate") == 0);
  CHECK(run({"search-semi", "--N", "3", "--runs", "1"}).code == kExitDomain);

  r = run({"shoot", "--N", "3"});
  REQUIRE(r.code == kExitOk);
  CHECK(io::number_from(json::parse(r.out).at("relative_error")) < 1e-6);
}

TEST_CASE("sweep with archive and parallel determinism") {
  TempDir tmp;
  auto a = run({"sweep", "--N-list", "3,4", "--beta-list", "0.3,1", "--initial-list", "bubble,cylinder",
                "--t-min", "-10", "--t-max", "10", "--archive-dir", tmp.file("runs")});
  REQUIRE(a.code == kExitOk);
  auto j = json::parse(a.out);
  CHECK(j.at("n_runs") == 8);
  CHECK(fs::exists(tmp.path / "runs" / "run_00007.json"));
  CHECK(j.at("runs").at(0).at("trajectory_path").get<std::string>().find("run_00000.json") !=
        std::string::npos);

  auto s = run({"sweep", "--N-list", "3,4", "--beta-list", "0.3,1", "--t-min", "-10", "--t-max", "10"});
  auto p = run({"sweep", "--N-list", "3,4", "--beta-list", "0.3,1", "--t-min", "-10", "--t-max", "10",
                "--threads", "3"});
  REQUIRE(s.code == kExitOk);
  CHECK(s.out == p.out);
}

TEST_CASE("theorem-level failures exit 2") {
  TempDir tmp;
  REQUIRE(run({"integrate", "--initial", "cylinder", "--out", tmp.file("c.json")}).code == kExitOk);
  // Certified, positive on the whole window, yet claiming positive energy.
  auto doc = io::read_json(tmp.file("c.json"));
  doc["psi0"] = io::number(0.25);
  io::write_json(doc, tmp.file("forged.json"));
  auto r = run({"classify", "--input", tmp.file("forged.json")});
  CHECK(r.code == kExitTheorem);
  CHECK(json::parse(r.out).at("evidence").at("theorem_violation") == true);

  // A coarse integrator cannot reach the apex tolerance.
  r = run({"shoot", "--N", "3", "--rtol", "1e-3", "--atol", "1e-3", "--max-step", "2"});
  CHECK(r.code == kExitTheorem);
}

}  // TEST_SUITE
