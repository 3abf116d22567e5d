#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>

namespace cbf_guard::detail {

// Shortest text that round-trips a double; locale independent.
inline std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

}  // namespace cbf_guard::detail
