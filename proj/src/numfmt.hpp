#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <string>

namespace tracejudge::detail {

/// Shortest decimal that parses back to the same double.
inline std::string shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

/// Rounds to `digits` significant digits, then renders shortest. Hides accumulation noise
/// such as 0.031 - 0.002 = 0.028999999999999998.
inline std::string significant(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return shortest(std::strtod(buf, nullptr));
}

}  // namespace tracejudge::detail
