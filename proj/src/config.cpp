#include "dpql/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace dpql {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::string_view text) {
  KeyValueConfig config;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;

    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("expected 'key = value', got '" + std::string(line) + "'", line_no);
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("empty key", line_no);
    if (value.empty()) throw ConfigError("empty value for '" + std::string(key) + "'", line_no);
    if (config.entries_.contains(std::string(key))) {
      throw ConfigError("duplicate key '" + std::string(key) + "'", line_no);
    }
    config.entries_[std::string(key)] = Entry{std::string(value), line_no};
  }
  return config;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

void KeyValueConfig::set(const std::string& key, std::string value) {
  entries_[key] = Entry{std::move(value), 0};
}

const KeyValueConfig::Entry* KeyValueConfig::find(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return nullptr;
  used_.insert(key);
  return &it->second;
}

std::optional<double> KeyValueConfig::get_double(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) return std::nullopt;
  double value = 0.0;
  const auto* first = e->value.data();
  const auto* last = first + e->value.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw ConfigError("'" + key + "' is not a number: '" + e->value + "'", e->line);
  }
  return value;
}

std::optional<long long> KeyValueConfig::get_int(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) return std::nullopt;
  long long value = 0;
  const auto* first = e->value.data();
  const auto* last = first + e->value.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw ConfigError("'" + key + "' is not an integer: '" + e->value + "'", e->line);
  }
  return value;
}

std::optional<unsigned long long> KeyValueConfig::get_uint(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) return std::nullopt;
  unsigned long long value = 0;
  const auto* first = e->value.data();
  const auto* last = first + e->value.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw ConfigError("'" + key + "' is not an unsigned integer: '" + e->value + "'", e->line);
  }
  return value;
}

std::optional<bool> KeyValueConfig::get_bool(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) return std::nullopt;
  if (e->value == "true" || e->value == "1" || e->value == "yes") return true;
  if (e->value == "false" || e->value == "0" || e->value == "no") return false;
  throw ConfigError("'" + key + "' is not a boolean: '" + e->value + "'", e->line);
}

std::optional<std::string> KeyValueConfig::get_string(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) return std::nullopt;
  return e->value;
}

void KeyValueConfig::reject_unused() const {
  for (const auto& [key, entry] : entries_) {
    if (!used_.contains(key)) throw ConfigError("unknown key '" + key + "'", entry.line);
  }
}

std::string KeyValueConfig::to_text() const {
  std::string out;
  for (const auto& [key, entry] : entries_) {
    out += key;
    out += " = ";
    out += entry.value;
    out += '\n';
  }
  return out;
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

}  // namespace dpql
