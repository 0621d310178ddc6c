// units.hpp: frequency/time unit conversions.
//
// Internally every frequency is angular (rad/ns) and every time is in ns.
// File formats and reports use ordinary frequency (GHz, MHz).

#pragma once

#include <numbers>

namespace apbs::units {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

constexpr double from_ghz(double f_ghz) noexcept { return two_pi * f_ghz; }
constexpr double from_mhz(double f_mhz) noexcept { return two_pi * f_mhz * 1e-3; }
constexpr double to_ghz(double omega) noexcept { return omega / two_pi; }
constexpr double to_mhz(double omega) noexcept { return omega / two_pi * 1e3; }

// Band center used as the default rotating frame.
inline constexpr double default_frame = two_pi * 5.5;

} // namespace apbs::units
