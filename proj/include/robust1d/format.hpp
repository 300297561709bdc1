#pragma once

#include <string>

namespace robust1d {

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

/// Parses a real written either as a decimal or as a fraction "a/b".
double parse_real(const std::string& text);

}  // namespace robust1d
