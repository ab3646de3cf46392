#pragma once

#include <charconv>
#include <string>
#include <system_error>

#include "gnts/error.hpp"

namespace gnts {

/// Shortest round-trip decimal form of a double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  require(res.ec == std::errc() && res.ptr == last, ErrorCode::ParseError,
          "not a number: '" + std::string(s) + "'");
  return v;
}

}  // namespace gnts
