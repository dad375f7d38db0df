#pragma once

// Ordered look-up tables of the position-independent coefficients over the
// coupling g, with hinted linear interpolation, effective potentials and
// heating profiles.

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "cqed/quantum_core.hpp"

namespace cqed {

enum class TableKind { cavity, free_space };

/// Grid of CouplingPointData from 0 to `peak`. For cavity tables `peak` is g0;
/// for free-space tables it is half the peak Rabi frequency, so the force and
/// diffusion formulas are identical in both cases.
struct CoefficientTable {
  SystemParams params;  // geometry, mass, gamma; for cavity tables also the drive and final cutoff
  TableKind kind = TableKind::cavity;
  double peak = 0.0;
  std::string drive_label;
  std::vector<double> grid;
  std::vector<CouplingPointData> rows;
  /// W(g) = int_0^g mean_phi dg', exact for the piecewise-linear interpolant.
  std::vector<double> work;

  std::size_t size() const { return grid.size(); }
  /// Throws ValidationError if the grid invariants do not hold.
  void check() const;
};

struct TableBuildOptions {
  std::size_t n_grid = 200;
  /// Raise the Fock cutoff in steps of 4 until every point passes the
  /// top-level population check. Off: CutoffTooSmall propagates.
  bool escalate_cutoff = true;
  int max_cutoff = 80;
  /// With escalation on, the cutoff is also raised until N + 4 changes no
  /// field by more than this (relative) at sample couplings. 0 skips the check.
  double stability_tolerance = 1e-6;
  unsigned threads = 0;
  std::string drive_label = "trap";
};

/// params.fock_cutoff == 0 selects default_fock_cutoff(params).
CoefficientTable build_table(const SystemParams& params, const TableBuildOptions& options = {});
CoefficientTable build_table(const SystemParams& params, std::size_t n_grid);

/// Assembles a table from precomputed rows (fills `work`).
CoefficientTable make_table(SystemParams params, TableKind kind, double peak, std::string drive_label,
                            std::vector<CouplingPointData> rows);

struct LookupResult {
  CouplingPointData data;
  std::size_t hint = 0;
};

/// Linear interpolation between the bracketing rows; the search starts at `hint`.
/// Throws OutOfRange for g < 0 or g > peak + 1e-12.
LookupResult lookup(const CoefficientTable& table, double g, std::size_t hint = 0);

/// Bracketing index i with grid[i] <= g < grid[i+1] (clamped to the last cell).
std::size_t locate(const CoefficientTable& table, double g, std::size_t hint);

/// W(g) consistent with the interpolated mean_phi (energy units with hbar = 1).
double work_at(const CoefficientTable& table, double g, std::size_t hint = 0);

/// Local coupling and its gradient magnitude direction, folded to g >= 0.
/// psi may be negative along the standing wave; the coefficients are even in g
/// and mean_phi is odd, so |g| with grad |psi| gives the same force.
struct LocalCoupling {
  double g = 0.0;
  Vec3 grad;  // gradient of |g|, in rad/us per um
};
LocalCoupling local_coupling(const CoefficientTable& table, const Vec3& r);

/// Potential energy U(r) = W(g(r)) (rad/us).
double potential_energy(const CoefficientTable& table, const Vec3& r);

/// Tr D / m at position r, in mK/ms.
double heating_rate(const CoefficientTable& table, const Vec3& r);

/// Tr D / m in internal units (rad/us per us).
double heating_power(const CoefficientTable& table, const CouplingPointData& d, const Vec3& grad_g);

enum class ProfileAxis { radial, axial };

struct PotentialProfile {
  std::string label;
  ProfileAxis axis = ProfileAxis::radial;
  std::vector<double> coordinate;  // um
  std::vector<double> potential;   // mK
  std::vector<double> heating;     // mK/ms
};

/// Potential by trapezoid quadrature of hbar g0 mean_phi dpsi/ds from the path
/// origin (mode centre for radial, antinode for axial) to `extent`. A negative
/// extent walks the -x or -y direction. extent = 0 picks 2.5 w0 (radial) or
/// lambda/2 (axial).
PotentialProfile effective_potential(const CoefficientTable& table, ProfileAxis axis, std::size_t n_points = 401,
                                     double extent = 0.0);

enum class DriveObservable { field_squared, photon_number };

/// Drive amplitude giving `target` for the empty cavity; both observables
/// coincide for the coherent empty-cavity state.
cplx drive_for_target(const SystemParams& params, double target, DriveObservable observable);

/// Small-amplitude oscillation frequency (kHz) from the curvature of a profile at its origin.
double harmonic_frequency_khz(const PotentialProfile& profile, double mass_kg);

// Persistence: CSV rows plus a JSON sidecar next to it (same stem, .json).
void to_json(nlohmann::json& j, const SystemParams& p);
void from_json(const nlohmann::json& j, SystemParams& p);

inline constexpr int kTableFormatVersion = 1;

nlohmann::json table_metadata(const CoefficientTable& table);
void write_table(const CoefficientTable& table, const std::filesystem::path& csv_path,
                 const nlohmann::json& extra = nlohmann::json::object());
CoefficientTable read_table(const std::filesystem::path& csv_path);

void write_profile_csv(const PotentialProfile& profile, const std::filesystem::path& path);

const char* to_string(TableKind kind);
const char* to_string(ProfileAxis axis);

}  // namespace cqed
