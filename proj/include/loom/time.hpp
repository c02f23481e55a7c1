#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>

namespace loom {

// Simulation time in integer microseconds. Every duration is rounded to the
// microsecond grid once, at the point where seconds enter the engine, so event
// ordering and trace replay are exact.
using Micros = std::int64_t;

inline Micros to_micros(double seconds) {
  return static_cast<Micros>(std::llround(seconds * 1e6));
}

inline double to_seconds(Micros us) { return static_cast<double>(us) / 1e6; }

// Fixed six-digit decimal rendering keeps serialized traces byte-stable.
inline std::string format_seconds(Micros us) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%lld.%06lld",
                static_cast<long long>(us / 1000000),
                static_cast<long long>(us % 1000000));
  return buf;
}

inline std::string format_fixed(double value, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, value);
  return buf;
}

}  // namespace loom
