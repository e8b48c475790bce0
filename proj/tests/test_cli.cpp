#include <doctest.h>

#include <fstream>
#include <sstream>

#include "../tools/cli.hpp"
#include "oracles.hpp"
#include "tosca/report.hpp"

using namespace tosca;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

nlohmann::json read_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

}  // namespace

TEST_CASE("usage errors exit 2") {
  auto r = run({"run", "--foo"});
  CHECK(r.code == 2);
  CHECK(r.err.find("Usage") != std::string::npos);
  CHECK(run({}).code == 2);
  CHECK(run({"run"}).code == 2);
  CHECK(run({"synth", "--out", "x.ftr", "--d", "abc"}).code == 2);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("runtime failures exit 1") {
  const auto r = run({"run", "--data", "no_such_file.ftr"});
  CHECK(r.code == 1);
  CHECK(r.err.rfind("error: ", 0) == 0);
}

TEST_CASE("synth then run writes a report matching the library") {
  oracle::TempDir tmp("cli");
  const auto train = (tmp / "f.ftr").string();
  auto s = run({"synth", "--out", train, "--d", "8", "--classes", "10", "--n-train", "20", "--n-test", "5",
                "--seed", "2"});
  REQUIRE(s.code == 0);
  CHECK(std::filesystem::exists(tmp / "f.test.ftr"));

  const auto out = (tmp / "r.json").string();
  auto r = run({"run", "--data", train, "--method", "tosca", "--inc", "5", "--seed", "1", "--r", "4",
                "--epochs", "3", "--out", out, "--plot", (tmp / "p.svg").string(), "--bank",
                (tmp / "b.bin").string()});
  REQUIRE(r.code == 0);
  const auto j = read_json(out);
  for (const char* key : {"method", "seed", "config", "stages", "A_bar", "params_per_task", "wall_time_s"})
    CHECK(j.contains(key));
  CHECK(j["stages"].size() == 2);
  CHECK(std::filesystem::exists(tmp / "p.svg"));
  CHECK(std::filesystem::exists(tmp / "b.bin"));

  // Same scenario through the library.
  SynthParams p;
  p.d = 8;
  p.num_classes = 10;
  p.n_train = 20;
  p.n_test = 5;
  p.seed = 2;
  const auto [tr, te] = synth_gaussian(p);
  EngineConfig cfg;
  cfg.r = 4;
  cfg.optim.epochs = 3;
  const auto lib = run_scenario(load_features(train), te, make_splits(tr.classes(), 0, 5, 1), Method::tosca, cfg, 1);
  auto cli_json = nlohmann::json::parse(read_json(out).dump());
  auto lib_json = nlohmann::json::parse(report_to_json(lib.report).dump());
  cli_json.erase("wall_time_s");
  lib_json.erase("wall_time_s");
  CHECK(cli_json == lib_json);
  CHECK(load_bank(tmp / "b.bin").entries() == lib.bank->entries());

  auto again = run({"run", "--data", train, "--method", "tosca", "--inc", "5", "--seed", "1", "--r", "4",
                    "--epochs", "3", "--out", (tmp / "r2.json").string()});
  REQUIRE(again.code == 0);
  auto j2 = read_json(tmp / "r2.json");
  j2.erase("wall_time_s");
  CHECK(j2 == cli_json);

  auto rep = run({"report", "--in", out, "--in", (tmp / "r2.json").string(), "--plot",
                  (tmp / "both.svg").string(), "--csv", (tmp / "both.csv").string()});
  CHECK(rep.code == 0);
  CHECK(std::filesystem::exists(tmp / "both.svg"));

  CHECK(run({"run", "--data", train, "--inc", "3"}).code == 1);
  CHECK(run({"run", "--data", train, "--method", "simplecil", "--inc", "5", "--bank", (tmp / "x.bin").string()}).code == 1);
  CHECK(run({"run", "--data", train, "--method", "nope"}).code == 2);
}

TEST_CASE("sweep writes one row per cell") {
  oracle::TempDir tmp("cli_sweep");
  const auto train = (tmp / "f.ftr").string();
  REQUIRE(run({"synth", "--out", train, "--d", "6", "--classes", "4", "--n-train", "10", "--n-test", "3"}).code == 0);
  const auto csv = (tmp / "s.csv").string();
  const auto r = run({"sweep", "--data", train, "--inc", "2", "--epochs", "1", "--lambdas", "0,0.05", "--ranks",
                      "2,3,4", "--out", csv});
  REQUIRE(r.code == 0);
  std::ifstream in(csv);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 7);
  CHECK(run({"sweep", "--data", train, "--inc", "2", "--lambdas", "x", "--out", csv}).code == 1);
}

TEST_CASE("gradcheck command") {
  const auto r = run({"gradcheck", "--trials", "5"});
  CHECK(r.code == 0);
  CHECK(r.out.find("max relative error") != std::string::npos);
  CHECK(run({"gradcheck", "--trials", "3", "--tol", "0"}).code == 1);
}
