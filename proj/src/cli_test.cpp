#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dpql/cli.hpp"

namespace fs = std::filesystem;
using dpql::cli::run;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "dpql");
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("dpql_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

nlohmann::json manifest_outputs(const fs::path& dir) {
  return nlohmann::json::parse(slurp(dir / "manifest.json"))["outputs"];
}

}  // namespace

TEST_CASE("usage errors") {
  CHECK(invoke({}).code == dpql::cli::kUsageError);
  CHECK(invoke({"nonsense"}).code == dpql::cli::kUsageError);
  CHECK(invoke({"--help"}).code == dpql::cli::kOk);
  const auto dir = scratch("usage");
  CHECK(invoke({"--out", dir.string(), "simulate", "--hours", "0"}).code == dpql::cli::kUsageError);
  CHECK(invoke({"--out", dir.string(), "significance", "--n", "100"}).code == dpql::cli::kUsageError);
  CHECK(invoke({"--config", "x.conf", "--paper-defaults", "thermal"}).code == dpql::cli::kUsageError);
}

TEST_CASE("configuration errors name the offending line") {
  const auto dir = scratch("config");
  std::ofstream(dir / "bad.conf") << "molecule.B_e_cm = 0.37\nthis line is wrong\n";
  const auto r = invoke({"--config", (dir / "bad.conf").string(), "--out", dir.string(), "thermal"});
  CHECK(r.code == dpql::cli::kUsageError);
  CHECK(r.err.find("line 2") != std::string::npos);
  std::ofstream(dir / "unknown.conf") << "molecule.B_e_cm = 0.37\nmolecule.colour = red\n";
  CHECK(invoke({"--config", (dir / "unknown.conf").string(), "--out", dir.string(), "thermal"}).code ==
        dpql::cli::kUsageError);
}

TEST_CASE("input errors") {
  const auto dir = scratch("input");
  CHECK(invoke({"--out", dir.string(), "analyze", "--dataset", (dir / "none.csv").string(), "--mode",
                "runs"})
            .code == dpql::cli::kInputError);
  std::ofstream(dir / "bad.csv") << "index,outcome,time_s,hidden\n0,0,0.0,0\n1,7,0.04,0\n";
  const auto r = invoke({"--out", dir.string(), "analyze", "--dataset", (dir / "bad.csv").string(),
                         "--mode", "runs"});
  CHECK(r.code == dpql::cli::kInputError);
  CHECK(r.err.find("row 2") != std::string::npos);
}

TEST_CASE("thermal table over several temperatures") {
  const auto dir = scratch("thermal");
  const auto r = invoke({"--out", dir.string(), "--temperature", "300", "--temperature", "450", "thermal"});
  REQUIRE(r.code == dpql::cli::kOk);
  const auto csv = slurp(dir / "thermal.csv");
  CHECK(csv.rfind("v,omega,J,energy_per_cm,population_T300K,population_T450K\n", 0) == 0);
  CHECK(fs::exists(dir / "manifest.json"));
}

TEST_CASE("runs are reproducible and the manifest records output digests") {
  const auto a = scratch("repro_a");
  const auto b = scratch("repro_b");
  for (const auto& dir : {a, b}) {
    REQUIRE(invoke({"--out", dir.string(), "--seed", "17", "simulate", "--hours", "0.05", "--trials", "2"})
                .code == dpql::cli::kOk);
  }
  const auto ma = manifest_outputs(a);
  CHECK(ma == manifest_outputs(b));
  CHECK(ma.size() == 5);
  for (const auto& entry : ma) {
    CHECK(entry["sha256"].get<std::string>() ==
          dpql::cli::sha256_file(a / entry["path"].get<std::string>()));
  }
  const auto m = nlohmann::json::parse(slurp(a / "manifest.json"));
  CHECK(m["seed"] == 17);
  CHECK(m["tool_version"] == dpql::cli::kToolVersion);

  const auto dataset = (a / "datasets" / "trial_000.csv").string();
  for (const std::string mode : {"bins", "runs", "hmm"}) {
    const auto out = scratch("analyze_" + mode);
    CHECK(invoke({"--out", out.string(), "analyze", "--dataset", dataset, "--mode", mode}).code ==
          dpql::cli::kOk);
  }
  CHECK(fs::exists(fs::temp_directory_path() / "dpql_cli_test_analyze_hmm" / "decoded.csv"));
}

TEST_CASE("significance and sweep commands") {
  const auto dir = scratch("signif");
  REQUIRE(invoke({"--out", dir.string(), "significance", "--n", "1000", "--x", "4"}).code == dpql::cli::kOk);
  const auto j = nlohmann::json::parse(slurp(dir / "significance.json"));
  CHECK(j["x"] == 4);
  CHECK(j["method"] == "exact");
  REQUIRE(invoke({"--out", dir.string(), "significance", "--n", "1000", "--z-target", "4.1"}).code ==
          dpql::cli::kOk);

  const auto sw = scratch("sweep");
  REQUIRE(invoke({"--out", sw.string(), "sweep", "--omega-mol-min-khz", "440", "--omega-mol-max-khz",
                  "460", "--omega-mol-step-khz", "5"})
              .code == dpql::cli::kOk);
  const auto w = nlohmann::json::parse(slurp(sw / "window.json"));
  CHECK(w.size() == 1);
  CHECK(w[0]["omega_mol_low_Hz"].get<double>() <= 440e3);
}
