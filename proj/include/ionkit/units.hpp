#pragma once

#include <numbers>

namespace ionkit {

// Interfaces carry frequency-equivalent values (E/h, in Hz). Integrators work
// in angular units (rad/s).
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

constexpr double to_angular(double hz) { return kTwoPi * hz; }
constexpr double to_hertz(double rad_per_s) { return rad_per_s / kTwoPi; }

}  // namespace ionkit
