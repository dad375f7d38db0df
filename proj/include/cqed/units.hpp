#pragma once

// Internal unit system: hbar = 1, time in microseconds, lengths in micrometres,
// angular frequencies in rad/us, momenta in units of hbar*k.

#include <numbers>

namespace cqed::units {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

inline constexpr double hbar_si = 1.054571817e-34;  // J s
inline constexpr double kB_si = 1.380649e-23;       // J/K
inline constexpr double amu_si = 1.66053906660e-27; // kg
inline constexpr double g_earth_si = 9.80665;       // m/s^2

inline constexpr double mass_cs133 = 132.905451933 * amu_si;
inline constexpr double mass_rb87 = 86.909180527 * amu_si;

/// Angular frequency (rad/us) for a cyclic frequency given in MHz.
constexpr double mhz(double f_mhz) { return two_pi * f_mhz; }

/// Cyclic frequency in MHz for an internal angular frequency.
constexpr double to_mhz(double omega) { return omega / two_pi; }

/// hbar/m in um^2/us.
constexpr double hbar_over_mass(double mass_kg) { return hbar_si / mass_kg * 1e6; }

/// An internal energy (rad/us, hbar = 1) expressed in millikelvin.
constexpr double energy_to_mK(double e) { return e * 1e6 * hbar_si / kB_si * 1e3; }

/// Inverse of energy_to_mK.
constexpr double mK_to_energy(double e_mK) { return e_mK * 1e-3 * kB_si / hbar_si * 1e-6; }

/// An internal power (rad/us per us) expressed in mK/ms.
constexpr double power_to_mK_per_ms(double p) { return energy_to_mK(p) * 1e3; }

// Note: 1 m/s == 1 um/us, so SI speeds need no conversion.

}  // namespace cqed::units
