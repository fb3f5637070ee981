#pragma once

#include <numbers>

namespace mzd {

// Exact SI values (2019 redefinition).
inline constexpr double kPlanck = 6.62607015e-34;        // J s
inline constexpr double kSpeedOfLight = 299792458.0;     // m/s
inline constexpr double kElementaryCharge = 1.602176634e-19;  // C

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Rubidium-87 D2 line.
inline constexpr double kRb87D2Wavelength = 780.241e-9;

}  // namespace mzd
