#include <doctest.h>

#include <cmath>

#include "cqed/free_space_model.hpp"
#include "cqed/units.hpp"
#include "oracles.hpp"
#include "presets.hpp"

using namespace cqed;

namespace {

FreeSpaceParams far_detuned() {
  FreeSpaceParams fp;
  fp.rabi_peak = units::mhz(20.0);
  fp.detuning = units::mhz(-200.0);
  fp.gamma = units::mhz(2.6);
  fp.wavelength = 0.852;
  fp.waist = 14.0;
  fp.mass = units::mass_cs133;
  return fp;
}

}  // namespace

TEST_CASE("excited population matches the optical Bloch solution") {
  const FreeSpaceParams fp = far_detuned();
  for (double omega : {0.0, 5.0, 60.0, 400.0, 3000.0}) {
    const CouplingPointData d = free_space_point_data(omega, fp);
    const double s = 0.5 * omega * omega / (fp.detuning * fp.detuning + fp.gamma * fp.gamma);
    CHECK(d.excited_pop == doctest::Approx(0.5 * s / (1 + s)).epsilon(1e-9).scale(1e-12));
    CHECK(bloch_excited_population(omega, fp.detuning, fp.gamma) == doctest::Approx(0.5 * s / (1 + s)));
    CHECK(d.g == doctest::Approx(0.5 * omega));
  }
}

TEST_CASE("dipole potential of the two-level atom") {
  // U(peak) = (detuning / 2) ln(1 + s), with s the saturation parameter
  for (double det_mhz : {-200.0, -40.0, 30.0}) {
    FreeSpaceParams fp = far_detuned();
    fp.detuning = units::mhz(det_mhz);
    const CoefficientTable t = build_free_space_table(fp, 400);
    const double s = 0.5 * fp.rabi_peak * fp.rabi_peak / (fp.detuning * fp.detuning + fp.gamma * fp.gamma);
    const double expect = 0.5 * fp.detuning * std::log1p(s);
    CAPTURE(det_mhz);
    CHECK(work_at(t, t.peak) == doctest::Approx(expect).epsilon(1e-4));
    // low saturation: the familiar Omega^2 / 4 detuning form
    if (det_mhz == -200.0)
      CHECK(work_at(t, t.peak) ==
            doctest::Approx(fp.detuning * fp.rabi_peak * fp.rabi_peak /
                            (4 * (fp.detuning * fp.detuning + fp.gamma * fp.gamma)))
                .epsilon(0.01));
  }
}

TEST_CASE("free-space correlations match quadrature") {
  const FreeSpaceParams fp = far_detuned();
  for (double omega : {10.0, 150.0, 900.0}) {
    const EvolutionGenerator gen = build_two_level_generator(omega, fp.detuning, fp.gamma);
    const CouplingPointData d = free_space_point_data(omega, fp);
    const oracle::Correlations o = oracle::quadrature(gen, fp.gamma, fp.gamma);
    CHECK(oracle::rel_err(d.xi, o.xi) < 1e-6);
    CHECK(oracle::rel_err(d.chi, o.chi) < 1e-6);
  }
}

TEST_CASE("equivalent field calibrations") {
  const SystemParams p = testing::params("hood");
  const FreeSpaceParams empty = free_space_equivalent(p, FreeSpaceCalibration::empty_cavity);
  CHECK(empty.rabi_peak == doctest::Approx(2.0 * p.g0 * std::sqrt(0.3)));
  CHECK(empty.detuning == p.delta_probe);
  CHECK(empty.gamma == p.gamma);

  const FreeSpaceParams loaded = free_space_equivalent(p, FreeSpaceCalibration::loaded_center);
  const double a = std::abs(solve_coupling_point(p, p.g0).field_amp);
  CHECK(loaded.rabi_peak == doctest::Approx(2.0 * p.g0 * a).epsilon(1e-12));
  SystemParams q = p;
  q.fock_cutoff += 8;
  CHECK(loaded.rabi_peak == doctest::Approx(2.0 * p.g0 * std::abs(solve_coupling_point(q, q.g0).field_amp)).epsilon(1e-4));
  CHECK(free_space_calibration_from_string("empty_cavity") == FreeSpaceCalibration::empty_cavity);
  CHECK_THROWS(free_space_calibration_from_string("bogus"));
}

TEST_CASE("free-space profiles share the cavity geometry") {
  const FreeSpaceParams fp = far_detuned();
  const auto [radial, axial] = build_free_space_profiles(fp, 201, 128);
  CHECK(radial.axis == ProfileAxis::radial);
  CHECK(axial.axis == ProfileAxis::axial);
  CHECK(radial.coordinate.back() == doctest::Approx(2.5 * fp.waist));
  CHECK(axial.coordinate.back() == doctest::Approx(0.5 * fp.wavelength));
  // red detuning: attractive, depth equal along both axes
  const double depth_r = radial.potential.back() - radial.potential.front();
  const double depth_a = *std::max_element(axial.potential.begin(), axial.potential.end()) - axial.potential.front();
  CHECK(depth_r > 0);
  CHECK(depth_a == doctest::Approx(depth_r).epsilon(5e-3));
}
