#pragma once

#include <charconv>
#include <string>
#include <system_error>

namespace gpf::detail {

// Shortest round-trip decimal form; keeps generated files byte-stable.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace gpf::detail
