#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace uforge::harness {

/// Flat "key = value" config text with dotted section names and '#'
/// comments. Typed getters raise InvalidInputError naming the field path.
class KvConfig {
 public:
  static KvConfig parse_file(const std::filesystem::path& path);
  static KvConfig parse_string(const std::string& text);

  bool has(const std::string& key) const;

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;

  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;

  std::int64_t get_int(const std::string& key) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;

  bool get_bool(const std::string& key, bool fallback) const;

  /// Comma-separated doubles; an empty value yields an empty list.
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback) const;
  /// Comma-separated non-negative integers.
  std::vector<std::size_t> get_size_list(const std::string& key,
                                         const std::vector<std::size_t>& fallback) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

  /// The raw text the config was parsed from (echoed into manifests).
  const std::string& raw_text() const { return raw_; }

 private:
  std::map<std::string, std::string> entries_;
  std::string raw_;
};

}  // namespace uforge::harness
