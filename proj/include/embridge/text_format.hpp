#pragma once

#include <charconv>
#include <string>

namespace embridge {

/// Shortest representation that round-trips; keeps emitted CSV deterministic
/// and locale-independent.
inline std::string format_double(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

} // namespace embridge
