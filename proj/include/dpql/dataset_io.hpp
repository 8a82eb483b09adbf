#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpql/spectroscopy.hpp"
#include "dpql/trajectory_sim.hpp"

namespace dpql::io {

/// Malformed dataset row. `row()` counts data rows from 1 (the header is row 0).
class DatasetError : public std::runtime_error {
 public:
  DatasetError(const std::string& what, std::size_t row)
      : std::runtime_error("row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

inline constexpr const char* kDatasetHeader = "index,outcome,time_s,hidden";

/// CSV with header `index,outcome,time_s,hidden`; hidden is 0, 1 or NA.
void write_records(std::ostream& out, const std::vector<sim::MeasurementRecord>& records);
std::vector<sim::MeasurementRecord> read_records(std::istream& in);

/// Path of the key-value sidecar written next to a dataset CSV.
std::filesystem::path sidecar_path(const std::filesystem::path& csv);

/// Writes the CSV and a sidecar holding the experiment, molecule and seed.
void save_dataset(const std::filesystem::path& csv, const sim::TrialDataset& dataset,
                  const spectroscopy::MolecularConstants& molecule);

/// Reads a dataset CSV, plus its sidecar configuration when one exists.
sim::TrialDataset load_dataset(const std::filesystem::path& csv);

}  // namespace dpql::io
