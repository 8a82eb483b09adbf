#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dpql {

/// Raised for malformed or inconsistent configuration. `line()` is 0 when the
/// problem is not tied to a particular line of a file.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Plain-text `key = value` configuration with `#` comments.
///
/// Every lookup marks its key as used so that callers can reject unknown keys
/// once all modules have read what they need.
class KeyValueConfig {
 public:
  struct Entry {
    std::string value;
    std::size_t line = 0;
  };

  KeyValueConfig() = default;

  static KeyValueConfig parse(std::string_view text);
  static KeyValueConfig load(const std::filesystem::path& path);

  void set(const std::string& key, std::string value);

  bool has(const std::string& key) const { return entries_.contains(key); }
  std::optional<double> get_double(const std::string& key) const;
  std::optional<long long> get_int(const std::string& key) const;
  std::optional<unsigned long long> get_uint(const std::string& key) const;
  std::optional<bool> get_bool(const std::string& key) const;
  std::optional<std::string> get_string(const std::string& key) const;

  double get_double(const std::string& key, double fallback) const {
    return get_double(key).value_or(fallback);
  }

  /// Throws ConfigError for the first key nobody asked for.
  void reject_unused() const;

  /// Canonical serialisation (sorted keys); parse(to_text()) round-trips.
  std::string to_text() const;

  const std::map<std::string, Entry>& entries() const { return entries_; }

 private:
  const Entry* find(const std::string& key) const;

  std::map<std::string, Entry> entries_;
  mutable std::set<std::string> used_;
};

/// Shortest round-trip decimal representation of a double.
std::string format_double(double value);

}  // namespace dpql
