#pragma once

#include <cstdint>

namespace confsim {

/* Simulation clock is integer microseconds from run start. */
using SimTime = int64_t;

constexpr SimTime kUsPerMs = 1000;
constexpr SimTime kUsPerSec = 1'000'000;

constexpr SimTime ms_to_us(double ms) { return static_cast<SimTime>(ms * 1000.0 + 0.5); }
constexpr double us_to_ms(SimTime us) { return static_cast<double>(us) / 1000.0; }

} // namespace confsim
