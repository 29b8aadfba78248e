#include "uforge/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "uforge/errors.hpp"

namespace uforge::harness {

namespace {

std::string trim(std::string_view s) {
  std::size_t begin = 0, end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
  return std::string(s.substr(begin, end - begin));
}

}  // namespace

KvConfig KvConfig::parse_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("config: cannot open " + path.string());
  std::stringstream buffer;
  buffer << is.rdbuf();
  return parse_string(buffer.str());
}

KvConfig KvConfig::parse_string(const std::string& text) {
  KvConfig cfg;
  cfg.raw_ = text;
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string trimmed = trim(line);
    if (trimmed.empty()) continue;
    const std::size_t eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw ParseError("config: expected 'key = value', got '" + trimmed + "'", line_no);
    }
    const std::string key = trim(trimmed.substr(0, eq));
    if (key.empty()) throw ParseError("config: empty key", line_no);
    cfg.entries_[key] = trim(trimmed.substr(eq + 1));
  }
  return cfg;
}

bool KvConfig::has(const std::string& key) const { return entries_.count(key) > 0; }

std::string KvConfig::get_string(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) {
    throw InvalidInputError("config: missing required field '" + key + "'");
  }
  return it->second;
}

std::string KvConfig::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

double KvConfig::get_double(const std::string& key) const {
  const std::string raw = get_string(key);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), value);
  if (ec != std::errc() || ptr != raw.data() + raw.size()) {
    throw InvalidInputError("config: field '" + key + "' is not a number: '" + raw + "'");
  }
  return value;
}

double KvConfig::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

std::int64_t KvConfig::get_int(const std::string& key) const {
  const std::string raw = get_string(key);
  std::int64_t value = 0;
  const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), value);
  if (ec != std::errc() || ptr != raw.data() + raw.size()) {
    throw InvalidInputError("config: field '" + key + "' is not an integer: '" + raw + "'");
  }
  return value;
}

std::int64_t KvConfig::get_int(const std::string& key, std::int64_t fallback) const {
  return has(key) ? get_int(key) : fallback;
}

std::uint64_t KvConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  if (!has(key)) return fallback;
  const std::string raw = get_string(key);
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), value);
  if (ec != std::errc() || ptr != raw.data() + raw.size()) {
    throw InvalidInputError("config: field '" + key + "' is not an unsigned integer: '" +
                            raw + "'");
  }
  return value;
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string raw = get_string(key);
  if (raw == "true" || raw == "1" || raw == "yes") return true;
  if (raw == "false" || raw == "0" || raw == "no") return false;
  throw InvalidInputError("config: field '" + key + "' is not a boolean: '" + raw + "'");
}

namespace {

std::vector<std::string> split_csv(const std::string& raw) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (pos <= raw.size()) {
    const std::size_t comma = raw.find(',', pos);
    const std::string part =
        trim(raw.substr(pos, (comma == std::string::npos ? raw.size() : comma) - pos));
    if (!part.empty()) parts.push_back(part);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return parts;
}

}  // namespace

std::vector<double> KvConfig::get_double_list(const std::string& key,
                                              const std::vector<double>& fallback) const {
  if (!has(key)) return fallback;
  std::vector<double> out;
  for (const std::string& part : split_csv(get_string(key))) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), value);
    if (ec != std::errc() || ptr != part.data() + part.size()) {
      throw InvalidInputError("config: field '" + key + "' has a non-numeric item: '" +
                              part + "'");
    }
    out.push_back(value);
  }
  return out;
}

std::vector<std::size_t> KvConfig::get_size_list(
    const std::string& key, const std::vector<std::size_t>& fallback) const {
  if (!has(key)) return fallback;
  std::vector<std::size_t> out;
  for (const std::string& part : split_csv(get_string(key))) {
    std::uint64_t value = 0;
    const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), value);
    if (ec != std::errc() || ptr != part.data() + part.size()) {
      throw InvalidInputError("config: field '" + key + "' has a non-integer item: '" +
                              part + "'");
    }
    out.push_back(value);
  }
  return out;
}

}  // namespace uforge::harness
