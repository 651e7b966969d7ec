#pragma once

#include <numbers>

namespace twpac::constants {

inline constexpr double hbar = 1.054571817e-34;
inline constexpr double elementary_charge = 1.602176634e-19;
/// Reduced flux quantum hbar/(2e), so that L_J = phi0 / I_c.
inline constexpr double phi0 = hbar / (2.0 * elementary_charge);
inline constexpr double two_pi = 2.0 * std::numbers::pi;

}  // namespace twpac::constants

namespace twpac::units {

inline constexpr double GHz = 1e9;
inline constexpr double uA = 1e-6;
inline constexpr double fF = 1e-15;
inline constexpr double pH = 1e-12;

/// Angular frequency from a frequency in GHz.
constexpr double ghz_to_omega(double f_ghz) { return constants::two_pi * f_ghz * GHz; }
constexpr double omega_to_ghz(double omega) { return omega / (constants::two_pi * GHz); }

}  // namespace twpac::units
