#pragma once

// Classical standing-wave comparison: a driven two-level atom with the cavity
// geometry, solved with the same steady-state and correlation machinery.

#include <string>
#include <utility>

#include "cqed/coefficient_tables.hpp"

namespace cqed {

/// How the peak Rabi frequency of the equivalent free-space field is chosen.
///  loaded_center: Omega0 = 2 g0 |<a>| with the atom at the mode centre (rho = 0, x = 0).
///  empty_cavity:  Omega0 = 2 g0 sqrt(n_empty).
enum class FreeSpaceCalibration { loaded_center, empty_cavity };

struct FreeSpaceParams {
  double rabi_peak = 0.0;  // Omega0, rad/us
  double detuning = 0.0;   // w_field - w_atom (the cavity preset's delta_probe)
  double gamma = 0.0;
  double wavelength = 0.0;
  double waist = 0.0;
  double mass = 0.0;
  FreeSpaceCalibration calibration = FreeSpaceCalibration::loaded_center;

  void validate() const;
};

/// Equivalent free-space field for a cavity preset at its trap drive.
FreeSpaceParams free_space_equivalent(const SystemParams& cavity,
                                      FreeSpaceCalibration calibration = FreeSpaceCalibration::loaded_center);

/// H = -detuning s^+ s + (omega/2)(s + s^+), decay gamma, observable s + s^+.
EvolutionGenerator build_two_level_generator(double omega, double detuning, double gamma);

/// Coefficients at local Rabi frequency omega; the returned g is omega/2, the
/// coupling that multiplies the observable.
CouplingPointData free_space_point_data(double omega, const FreeSpaceParams& params);

/// Closed-form optical-Bloch excited population.
double bloch_excited_population(double omega, double detuning, double gamma);

/// Table over the coupling omega/2 in [0, rabi_peak/2].
CoefficientTable build_free_space_table(const FreeSpaceParams& params, std::size_t n_grid = 200, unsigned threads = 0);

std::pair<PotentialProfile, PotentialProfile> build_free_space_profiles(const FreeSpaceParams& params,
                                                                        std::size_t n_points = 401,
                                                                        std::size_t n_grid = 200);

const char* to_string(FreeSpaceCalibration c);
FreeSpaceCalibration free_space_calibration_from_string(const std::string& s);

}  // namespace cqed
