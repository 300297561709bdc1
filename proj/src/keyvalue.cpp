#include "robust1d/keyvalue.hpp"

#include <fstream>
#include <sstream>

#include "robust1d/errors.hpp"
#include "robust1d/format.hpp"

namespace robust1d {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Strips a trailing comment, ignoring '#' inside quoted strings.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\\' && quoted) {
      ++i;
    } else if (line[i] == '"') {
      quoted = !quoted;
    } else if (line[i] == '#' && !quoted) {
      return line.substr(0, i);
    }
  }
  return line;
}

std::string unquote(const std::string& raw, const std::string& key) {
  if (raw.size() < 2 || raw.front() != '"' || raw.back() != '"') {
    throw FormatError("config key '" + key + "' is not a quoted string");
  }
  std::string out;
  for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
    if (raw[i] != '\\') {
      out += raw[i];
      continue;
    }
    if (++i + 1 >= raw.size()) throw FormatError("config key '" + key + "' has a bad escape");
    switch (raw[i]) {
      case 'n': out += '\n'; break;
      case 't': out += '\t'; break;
      case '"': out += '"'; break;
      case '\\': out += '\\'; break;
      default: throw FormatError("config key '" + key + "' has a bad escape");
    }
  }
  return out;
}

// Splits the inside of "[a, b]" at top-level commas.
std::vector<std::string> split_array(const std::string& raw, const std::string& key) {
  if (raw.size() < 2 || raw.front() != '[' || raw.back() != ']') {
    throw FormatError("config key '" + key + "' is not an array");
  }
  std::vector<std::string> items;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
    const char c = raw[i];
    if (c == '\\' && quoted && i + 2 < raw.size()) {
      current += c;
      current += raw[++i];
      continue;
    }
    if (c == '"') quoted = !quoted;
    if (c == ',' && !quoted) {
      items.push_back(trim(current));
      current.clear();
    } else {
      current += c;
    }
  }
  if (!trim(current).empty()) items.push_back(trim(current));
  return items;
}

std::string scalar_text(const std::string& raw, const std::string& key) {
  return !raw.empty() && raw.front() == '"' ? unquote(raw, key) : raw;
}

}  // namespace

KeyValueFile KeyValueFile::parse(const std::string& text) {
  KeyValueFile kv;
  kv.source_ = text;
  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(strip_comment(line));
    if (t.empty()) continue;
    if (t.front() == '[' && t.back() == ']' && t.find('=') == std::string::npos) {
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty()) throw FormatError("line " + std::to_string(lineno) + ": empty section name");
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw FormatError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty() || value.empty()) throw FormatError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string full = section.empty() ? key : section + "." + key;
    if (kv.values_.count(full)) throw FormatError("line " + std::to_string(lineno) + ": duplicate key '" + full + "'");
    if (value.front() == '"') unquote(value, full);
    kv.values_[full] = value;
  }
  return kv;
}

KeyValueFile KeyValueFile::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::vector<std::string> KeyValueFile::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) out.push_back(k);
  return out;
}

std::string KeyValueFile::get_string(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw FormatError("missing config key '" + key + "'");
  return scalar_text(it->second, key);
}

double KeyValueFile::get_real(const std::string& key) const {
  const std::string s = get_string(key);
  try {
    return parse_real(s);
  } catch (const FormatError&) {
    throw FormatError("config key '" + key + "' is not a number: " + s);
  }
}

std::int64_t KeyValueFile::get_int(const std::string& key) const {
  const std::string s = get_string(key);
  std::size_t used = 0;
  std::int64_t v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw FormatError("config key '" + key + "' is not an integer: " + s);
  return v;
}

bool KeyValueFile::get_bool(const std::string& key) const {
  const std::string s = get_string(key);
  if (s == "true") return true;
  if (s == "false") return false;
  throw FormatError("config key '" + key + "' is not a boolean: " + s);
}

std::vector<std::string> KeyValueFile::get_list(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw FormatError("missing config key '" + key + "'");
  std::vector<std::string> out;
  for (const auto& item : split_array(it->second, key)) out.push_back(scalar_text(item, key));
  return out;
}

std::string KeyValueFile::get_string(const std::string& key, const std::string& fallback) const {
  return has(key) ? get_string(key) : fallback;
}
double KeyValueFile::get_real(const std::string& key, double fallback) const {
  return has(key) ? get_real(key) : fallback;
}
std::int64_t KeyValueFile::get_int(const std::string& key, std::int64_t fallback) const {
  return has(key) ? get_int(key) : fallback;
}
bool KeyValueFile::get_bool(const std::string& key, bool fallback) const {
  return has(key) ? get_bool(key) : fallback;
}

std::string KeyValueFile::quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

std::string KeyValueFile::to_string() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

}  // namespace robust1d
