#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "dpql/dataset_io.hpp"

using namespace dpql;
using namespace dpql::io;

namespace {

std::size_t error_row(const std::string& csv) {
  std::istringstream in(csv);
  try {
    (void)read_records(in);
  } catch (const DatasetError& e) {
    return e.row();
  }
  FAIL("expected a DatasetError");
  return 0;
}

}  // namespace

TEST_CASE("records round-trip with and without labels") {
  std::vector<sim::MeasurementRecord> records{
      {0, 0, 0.0, false}, {1, 1, 0.04, true}, {2, 1, 0.08, std::nullopt}};
  std::ostringstream out;
  write_records(out, records);
  CHECK(out.str().rfind(std::string(kDatasetHeader) + "\n", 0) == 0);
  CHECK(out.str().find(",NA\n") != std::string::npos);
  std::istringstream in(out.str());
  CHECK(read_records(in) == records);
}

TEST_CASE("malformed rows report their row number") {
  const std::string h = std::string(kDatasetHeader) + "\n";
  CHECK(error_row(h + "0,0,0.0,0\n1,2,0.04,0\n") == 2);
  CHECK(error_row(h + "0,0,0.0\n") == 1);
  CHECK(error_row(h + "0,0,0.0,0\n1,0,0.0,0\n") == 2);
  CHECK(error_row(h + "0,0,0.0,0\n1,0,0.04,0\n2,0,abc,0\n") == 3);
  CHECK(error_row(h + "0,0,0.0,maybe\n") == 1);
  CHECK(error_row("time,outcome\n") == 0);
  CHECK(error_row("") == 0);
}

TEST_CASE("datasets save with a sidecar and load back") {
  sim::TrialDataset d;
  d.config.seed = 99;
  d.config.temperature = 450.0;
  d.seed = 12345;
  d.records = {{0, 1, 0.0, true}, {1, 0, 0.04, false}};
  const auto dir = std::filesystem::temp_directory_path() / "dpql_io_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "trial.csv";
  save_dataset(path, d, {});
  CHECK(std::filesystem::exists(sidecar_path(path)));
  const auto back = load_dataset(path);
  CHECK(back.records == d.records);
  CHECK(back.seed == 12345);
  CHECK(back.config.temperature == 450.0);
  std::filesystem::remove(sidecar_path(path));
  const auto bare = load_dataset(path);
  CHECK(bare.records == d.records);
  std::filesystem::remove_all(dir);
  CHECK_THROWS(load_dataset(dir / "missing.csv"));
}
