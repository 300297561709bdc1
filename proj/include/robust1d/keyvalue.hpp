#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace robust1d {

/// A small TOML subset: `[section]` headers, `key = value` lines and `#`
/// comments. Values are double-quoted strings, numbers, booleans, or
/// single-line arrays of those. Keys inside a section are stored as
/// "section.key".
class KeyValueFile {
 public:
  static KeyValueFile parse(const std::string& text);
  static KeyValueFile load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::vector<std::string> keys() const;

  /// Throw FormatError naming the key when it is missing or mistyped.
  std::string get_string(const std::string& key) const;
  double get_real(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::string> get_list(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_real(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  void set(const std::string& key, const std::string& raw_value) { values_[key] = raw_value; }
  /// Quotes and escapes a string for use as a value.
  static std::string quote(const std::string& s);

  /// Keys in sorted order, one `key = value` per line, without sections.
  std::string to_string() const;
  const std::string& source() const { return source_; }

 private:
  std::map<std::string, std::string> values_;  // raw value text
  std::string source_;
};

}  // namespace robust1d
