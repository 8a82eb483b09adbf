#pragma once

#include <numbers>

namespace dpql::constants {

// CODATA 2018 exact SI values.
inline constexpr double planck = 6.62607015e-34;          // J s
inline constexpr double speed_of_light = 2.99792458e8;    // m / s
inline constexpr double boltzmann = 1.380649e-23;         // J / K
inline constexpr double vacuum_permittivity = 8.8541878128e-12;  // F / m
inline constexpr double debye = 3.33564095198152e-30;     // C m

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Boltzmann constant expressed as a wavenumber per kelvin (cm^-1 / K).
inline constexpr double boltzmann_wavenumber = boltzmann / (planck * speed_of_light * 100.0);

/// Converts a wavenumber (cm^-1) to an ordinary frequency (Hz).
constexpr double wavenumber_to_hz(double wavenumber_cm) {
  return wavenumber_cm * speed_of_light * 100.0;
}

}  // namespace dpql::constants
