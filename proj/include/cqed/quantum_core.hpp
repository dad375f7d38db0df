#pragma once

// Fixed-position driven Jaynes-Cummings master equation: generator assembly,
// steady state, and the integrated force correlations that feed the motional
// Fokker-Planck coefficients.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <array>
#include <complex>
#include <memory>
#include <vector>

namespace cqed {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using SparseCMatrix = Eigen::SparseMatrix<cplx>;

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
  friend double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
  double norm2() const { return x * x + y * y + z * z; }
};

/// Physical and drive parameters of one experimental regime.
/// Frequencies are angular (rad/us), lengths in um, mass in kg.
struct SystemParams {
  double g0 = 0.0;           // peak coupling
  double gamma = 0.0;        // atomic dipole decay rate (HWHM)
  double kappa = 0.0;        // cavity field decay rate
  double delta_ac = 0.0;     // w_cavity - w_atom
  double delta_probe = 0.0;  // w_probe - w_atom
  cplx drive{0.0, 0.0};      // cavity drive amplitude
  double wavelength = 0.0;
  double waist = 0.0;
  double mass = 0.0;
  int fock_cutoff = 0;  // photon numbers 0..fock_cutoff

  double wavenumber() const;
  /// w_cavity - w_probe.
  double cavity_probe_detuning() const { return delta_ac - delta_probe; }
  /// |<a>|^2 of the empty cavity at this drive.
  double empty_cavity_photons() const;
  /// Throws ValidationError naming the first invalid field.
  void validate() const;

  friend bool operator==(const SystemParams&, const SystemParams&) = default;
};

/// ceil(n + 6 sqrt(n) + 6) for the empty-cavity photon number n.
int default_fock_cutoff(const SystemParams& params);

struct ModeValue {
  double psi = 0.0;
  Vec3 grad;
};

/// psi = cos(kx) exp(-(y^2+z^2)/w0^2) and its gradient.
ModeValue mode_function(const Vec3& r, const SystemParams& params);
ModeValue mode_function(const Vec3& r, double wavenumber, double waist);

struct DressedEnergies {
  double plus = 0.0;
  double minus = 0.0;
};

/// Dressed first-manifold energies relative to (w_atom + w_cavity)/2.
DressedEnergies dressed_energies(double g, double delta_ac);

/// One Lindblad channel rate * (2 c rho c^+ - c^+ c rho - rho c^+ c).
struct Dissipator {
  double rate = 0.0;
  CMatrix op;
};

/// Superoperator acting on column-major vectorised density operators,
/// together with the operators needed to read out the force statistics.
class EvolutionGenerator {
 public:
  /// Generic Lindblad generator; `observable` is the dimensionless force operator.
  EvolutionGenerator(const CMatrix& hamiltonian, std::vector<Dissipator> dissipators, CMatrix observable,
                     CMatrix excited_projector, CMatrix field = {});

  int dimension() const { return dim_; }
  const SparseCMatrix& matrix() const { return matrix_; }
  const CMatrix& hamiltonian() const { return hamiltonian_; }
  const std::vector<Dissipator>& dissipators() const { return dissipators_; }
  const CMatrix& observable() const { return observable_; }
  const CMatrix& excited_projector() const { return excited_; }
  /// Cavity annihilation operator; empty for the free-space two-level system.
  const CMatrix& field() const { return field_; }
  /// Photon-number cutoff, or -1 without a cavity.
  int fock_cutoff() const { return field_.size() == 0 ? -1 : dim_ / 2 - 1; }

  CVector apply(const CVector& vec_rho) const;
  CMatrix apply(const CMatrix& rho) const;
  /// Frobenius-type norm of the sparse superoperator (used for residual scaling).
  double norm() const;

 private:
  int dim_;
  CMatrix hamiltonian_;
  std::vector<Dissipator> dissipators_;
  CMatrix observable_;
  CMatrix excited_;
  CMatrix field_;
  SparseCMatrix matrix_;
};

/// Atom-cavity basis index for photon number n and atomic state s (0 = ground).
inline int jc_index(int n, int s) { return 2 * n + s; }

/// Assembles the probe-frame Jaynes-Cummings generator at coupling g.
EvolutionGenerator build_generator(const SystemParams& params, double g);

/// Density matrix satisfying trace 1, hermiticity and positivity to tolerance.
class DensityState {
 public:
  explicit DensityState(CMatrix rho);
  const CMatrix& matrix() const { return rho_; }
  int dimension() const { return static_cast<int>(rho_.rows()); }
  cplx expectation(const CMatrix& op) const;
  /// Largest violation of the trace/hermiticity/positivity invariants.
  double invariant_violation() const;

 private:
  CMatrix rho_;
};

/// LU factorisation of the generator with one population row replaced by the
/// trace functional. Solves L x = s subject to Tr x = t.
class BorderedSolver {
 public:
  explicit BorderedSolver(const EvolutionGenerator& gen);
  CVector solve(const CVector& source, cplx trace_value) const;
  CMatrix solve(const CMatrix& source, cplx trace_value) const;

 private:
  int dim_;
  Eigen::SparseLU<SparseCMatrix, Eigen::COLAMDOrdering<int>> lu_;
};

DensityState steady_state(const EvolutionGenerator& gen);
DensityState steady_state(const EvolutionGenerator& gen, const BorderedSolver& solver);

/// Position-independent scalars at one coupling value.
struct CouplingPointData {
  double g = 0.0;
  double mean_phi = 0.0;
  double xi = 0.0;   // us
  double chi = 0.0;  // us^2
  double excited_pop = 0.0;
  cplx field_amp{0.0, 0.0};
  double photon_number = 0.0;

  friend bool operator==(const CouplingPointData&, const CouplingPointData&) = default;
};

/// Fills mean_phi, excited_pop, field_amp, photon_number.
CouplingPointData static_expectations(const DensityState& rho, const EvolutionGenerator& gen);

/// xi = int_0^inf dtau 1/2 <dPhi(tau) dPhi(0) + dPhi(0) dPhi(tau)>.
double integrated_symmetric_correlation(const EvolutionGenerator& gen, const DensityState& rho);
double integrated_symmetric_correlation(const EvolutionGenerator& gen, const DensityState& rho,
                                        const BorderedSolver& solver);

/// chi = i int_0^inf dtau tau <[Phi(tau), Phi(0)]>.
double integrated_weighted_commutator(const EvolutionGenerator& gen, const DensityState& rho);
double integrated_weighted_commutator(const EvolutionGenerator& gen, const DensityState& rho,
                                      const BorderedSolver& solver);

/// Population in the highest Fock level (0 for generators without a cavity).
double top_fock_population(const DensityState& rho, const EvolutionGenerator& gen);

inline constexpr double kTopPopulationLimit = 1e-6;

/// Full point evaluation with a single factorisation. Throws CutoffTooSmall.
CouplingPointData solve_coupling_point(const EvolutionGenerator& gen, double g);
CouplingPointData solve_coupling_point(const SystemParams& params, double g);

struct RecoilTensor {
  double exx = 0.0, eyy = 0.0, ezz = 0.0;
};

/// Angular second moments of the dipole emission pattern, by spherical quadrature.
RecoilTensor recoil_tensor();

struct ValidityReport {
  double recoil_over_gamma = 0.0;
  double recoil_over_kappa = 0.0;
  double epsilon1 = 0.0;
  double epsilon2 = 0.0;
};

/// `delta_p` is the momentum spread in units of hbar*k.
ValidityReport validity_report(const SystemParams& params, double delta_p);

}  // namespace cqed
