#include "robust1d/format.hpp"

#include <array>
#include <charconv>
#include <cmath>

#include "robust1d/errors.hpp"

namespace robust1d {

std::string format_double(double value) {
  std::array<char, 64> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) throw FormatError("cannot format number");
  return std::string(buf.data(), end);
}

namespace {

double parse_plain(const std::string& text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || first == last) throw FormatError("not a number: '" + text + "'");
  return v;
}

}  // namespace

double parse_real(const std::string& text) {
  const auto slash = text.find('/');
  if (slash == std::string::npos) return parse_plain(text);
  const double num = parse_plain(text.substr(0, slash));
  const double den = parse_plain(text.substr(slash + 1));
  if (den == 0.0) throw FormatError("zero denominator in '" + text + "'");
  return num / den;
}

}  // namespace robust1d
