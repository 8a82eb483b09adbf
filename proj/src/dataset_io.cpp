#include "dpql/dataset_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <string_view>

#include <fmt/format.h>

namespace dpql::io {
namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  for (;;) {
    const auto comma = line.find(',', pos);
    out.push_back(line.substr(pos, comma == std::string_view::npos ? line.npos : comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view field, const char* name, std::size_t row) {
  T value{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw DatasetError(fmt::format("bad {} '{}'", name, field), row);
  }
  return value;
}

}  // namespace

void write_records(std::ostream& out, const std::vector<sim::MeasurementRecord>& records) {
  out << kDatasetHeader << '\n';
  for (const auto& r : records) {
    out << r.index << ',' << r.outcome << ',' << format_double(r.time) << ','
        << (r.in_ground ? (*r.in_ground ? "1" : "0") : "NA") << '\n';
  }
}

std::vector<sim::MeasurementRecord> read_records(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DatasetError("missing header", 0);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kDatasetHeader) {
    throw DatasetError(fmt::format("expected header '{}', got '{}'", kDatasetHeader, line), 0);
  }
  std::vector<sim::MeasurementRecord> records;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line);
    if (fields.size() != 4) {
      throw DatasetError(fmt::format("expected 4 fields, got {}", fields.size()), row);
    }
    sim::MeasurementRecord r;
    r.index = parse_number<std::size_t>(fields[0], "index", row);
    r.outcome = parse_number<int>(fields[1], "outcome", row);
    if (r.outcome != 0 && r.outcome != 1) throw DatasetError("outcome must be 0 or 1", row);
    r.time = parse_number<double>(fields[2], "time_s", row);
    if (fields[3] == "NA") {
      r.in_ground.reset();
    } else if (fields[3] == "0" || fields[3] == "1") {
      r.in_ground = fields[3] == "1";
    } else {
      throw DatasetError(fmt::format("hidden must be 0, 1 or NA, got '{}'", fields[3]), row);
    }
    if (!records.empty() && !(r.time > records.back().time)) {
      throw DatasetError("timestamps must be strictly increasing", row);
    }
    records.push_back(r);
  }
  return records;
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
  std::filesystem::path p = csv;
  p += ".config";
  return p;
}

void save_dataset(const std::filesystem::path& csv, const sim::TrialDataset& dataset,
                  const spectroscopy::MolecularConstants& molecule) {
  {
    std::ofstream out(csv, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + csv.string());
    write_records(out, dataset.records);
  }
  KeyValueConfig config;
  dataset.config.write_config(config);
  molecule.write_config(config);
  config.set("dataset.seed", std::to_string(dataset.seed));
  std::ofstream side(sidecar_path(csv), std::ios::binary);
  if (!side) throw std::runtime_error("cannot write " + sidecar_path(csv).string());
  side << config.to_text();
}

sim::TrialDataset load_dataset(const std::filesystem::path& csv) {
  std::ifstream in(csv, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset " + csv.string());
  sim::TrialDataset d;
  d.records = read_records(in);
  const auto side = sidecar_path(csv);
  if (std::filesystem::exists(side)) {
    const KeyValueConfig config = KeyValueConfig::load(side);
    d.config = sim::ExperimentConfig::from_config(config);
    if (auto s = config.get_uint("dataset.seed")) d.seed = static_cast<std::uint64_t>(*s);
  }
  return d;
}

}  // namespace dpql::io
