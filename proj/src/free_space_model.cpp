#include "cqed/free_space_model.hpp"

#include <cmath>

#include "cqed/errors.hpp"
#include "cqed/numerics.hpp"
#include "cqed/units.hpp"

namespace cqed {

void FreeSpaceParams::validate() const {
  if (!(rabi_peak >= 0.0) || !std::isfinite(rabi_peak)) throw ValidationError("rabi_peak");
  if (!(gamma > 0.0)) throw ValidationError("gamma");
  if (!(wavelength > 0.0)) throw ValidationError("wavelength");
  if (!(waist > 0.0)) throw ValidationError("waist");
  if (!(mass > 0.0)) throw ValidationError("mass");
}

FreeSpaceParams free_space_equivalent(const SystemParams& cavity, FreeSpaceCalibration calibration) {
  FreeSpaceParams fp;
  fp.detuning = cavity.delta_probe;
  fp.gamma = cavity.gamma;
  fp.wavelength = cavity.wavelength;
  fp.waist = cavity.waist;
  fp.mass = cavity.mass;
  fp.calibration = calibration;
  if (calibration == FreeSpaceCalibration::empty_cavity) {
    fp.rabi_peak = 2.0 * cavity.g0 * std::sqrt(cavity.empty_cavity_photons());
  } else {
    SystemParams p = cavity;
    if (p.fock_cutoff == 0) p.fock_cutoff = default_fock_cutoff(p);
    for (;;) {
      try {
        fp.rabi_peak = 2.0 * cavity.g0 * std::abs(solve_coupling_point(p, cavity.g0).field_amp);
        break;
      } catch (const CutoffTooSmall&) {
        if (p.fock_cutoff > 80) throw;
        p.fock_cutoff += 4;
      }
    }
  }
  return fp;
}

EvolutionGenerator build_two_level_generator(double omega, double detuning, double gamma) {
  CMatrix s = CMatrix::Zero(2, 2);
  s(0, 1) = 1.0;
  const CMatrix sd = s.adjoint();
  const CMatrix excited = sd * s;
  const CMatrix h = -detuning * excited + 0.5 * omega * (s + sd);
  return EvolutionGenerator(h, {{gamma, s}}, s + sd, excited);
}

CouplingPointData free_space_point_data(double omega, const FreeSpaceParams& params) {
  if (!(omega >= 0.0)) throw ValidationError("omega");
  return solve_coupling_point(build_two_level_generator(omega, params.detuning, params.gamma), 0.5 * omega);
}

double bloch_excited_population(double omega, double detuning, double gamma) {
  const double w2 = omega * omega;
  return 0.25 * w2 / (detuning * detuning + gamma * gamma + 0.5 * w2);
}

CoefficientTable build_free_space_table(const FreeSpaceParams& params, std::size_t n_grid, unsigned threads) {
  params.validate();
  if (n_grid < 2) throw ValidationError("n_grid");
  const double peak = 0.5 * params.rabi_peak;
  const std::vector<double> grid = numerics::linspace(0.0, peak, n_grid);
  std::vector<CouplingPointData> rows(n_grid);
  numerics::parallel_for(
      n_grid,
      [&](std::size_t i) {
        rows[i] = free_space_point_data(2.0 * grid[i], params);
        rows[i].g = grid[i];
      },
      threads);
  // Geometry carrier; the cavity-only fields are placeholders.
  SystemParams geo;
  geo.g0 = peak;
  geo.gamma = params.gamma;
  geo.kappa = 1.0;
  geo.delta_probe = params.detuning;
  geo.wavelength = params.wavelength;
  geo.waist = params.waist;
  geo.mass = params.mass;
  geo.fock_cutoff = 0;
  if (peak == 0.0) {
    // Degenerate flat table: keep a strictly increasing grid.
    rows.resize(2);
    rows[0] = rows[1] = CouplingPointData{};
    rows[1].g = 1e-300;
    CoefficientTable t = make_table(geo, TableKind::free_space, 1e-300, "free_space", std::move(rows));
    return t;
  }
  return make_table(geo, TableKind::free_space, peak, "free_space", std::move(rows));
}

std::pair<PotentialProfile, PotentialProfile> build_free_space_profiles(const FreeSpaceParams& params,
                                                                        std::size_t n_points, std::size_t n_grid) {
  const CoefficientTable t = build_free_space_table(params, n_grid);
  return {effective_potential(t, ProfileAxis::radial, n_points), effective_potential(t, ProfileAxis::axial, n_points)};
}

const char* to_string(FreeSpaceCalibration c) {
  return c == FreeSpaceCalibration::loaded_center ? "loaded_center" : "empty_cavity";
}

FreeSpaceCalibration free_space_calibration_from_string(const std::string& s) {
  if (s == "loaded_center") return FreeSpaceCalibration::loaded_center;
  if (s == "empty_cavity") return FreeSpaceCalibration::empty_cavity;
  throw ValidationError("free_space.calibration", "unknown free-space calibration '" + s + "'");
}

}  // namespace cqed
