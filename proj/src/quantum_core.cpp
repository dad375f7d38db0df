#include "cqed/quantum_core.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "cqed/errors.hpp"
#include "cqed/numerics.hpp"
#include "cqed/units.hpp"

namespace cqed {

namespace {

using Triplet = Eigen::Triplet<cplx>;

constexpr cplx kI{0.0, 1.0};

// Appends coeff * (B^T kron A), the column-major matrix of X -> A X B.
void add_sandwich(std::vector<Triplet>& out, const CMatrix& a, const CMatrix& b, cplx coeff) {
  const int d = static_cast<int>(a.rows());
  for (int k = 0; k < d; ++k) {
    for (int i = 0; i < d; ++i) {
      const cplx aik = a(i, k);
      if (aik == 0.0) continue;
      for (int l = 0; l < d; ++l) {
        for (int j = 0; j < d; ++j) {
          const cplx blj = b(l, j);
          if (blj == 0.0) continue;
          out.emplace_back(i + j * d, k + l * d, coeff * aik * blj);
        }
      }
    }
  }
}

CVector vec(const CMatrix& m) { return Eigen::Map<const CVector>(m.data(), m.size()); }

CMatrix unvec(const CVector& v, int d) { return Eigen::Map<const CMatrix>(v.data(), d, d); }

cplx trace_product(const CMatrix& op, const CMatrix& rho) {
  // Tr(op rho) = sum_ij op_ji rho_ij
  return (op.transpose().cwiseProduct(rho)).sum();
}

}  // namespace

double SystemParams::wavenumber() const { return units::two_pi / wavelength; }

double SystemParams::empty_cavity_photons() const {
  const double dcp = cavity_probe_detuning();
  return std::norm(drive) / (kappa * kappa + dcp * dcp);
}

void SystemParams::validate() const {
  auto require = [](bool ok, const char* field) {
    if (!ok) throw ValidationError(field);
  };
  require(std::isfinite(g0) && g0 > 0.0, "g0");
  require(std::isfinite(gamma) && gamma > 0.0, "gamma");
  require(std::isfinite(kappa) && kappa > 0.0, "kappa");
  require(std::isfinite(delta_ac), "delta_ac");
  require(std::isfinite(delta_probe), "delta_probe");
  require(std::isfinite(drive.real()) && std::isfinite(drive.imag()), "drive");
  require(std::isfinite(wavelength) && wavelength > 0.0, "wavelength");
  require(std::isfinite(waist) && waist > 0.0, "waist");
  require(std::isfinite(mass) && mass > 0.0, "mass");
  require(fock_cutoff >= 2, "fock_cutoff");
}

int default_fock_cutoff(const SystemParams& params) {
  const double n = params.empty_cavity_photons();
  return std::max(2, static_cast<int>(std::ceil(n + 6.0 * std::sqrt(n) + 6.0)));
}

ModeValue mode_function(const Vec3& r, double k, double waist) {
  const double w2 = waist * waist;
  const double c = std::cos(k * r.x);
  const double s = std::sin(k * r.x);
  const double gauss = std::exp(-(r.y * r.y + r.z * r.z) / w2);
  ModeValue out;
  out.psi = c * gauss;
  out.grad = {-k * s * gauss, -2.0 * r.y / w2 * out.psi, -2.0 * r.z / w2 * out.psi};
  return out;
}

ModeValue mode_function(const Vec3& r, const SystemParams& params) {
  return mode_function(r, params.wavenumber(), params.waist);
}

DressedEnergies dressed_energies(double g, double delta_ac) {
  const double root = std::sqrt(g * g + 0.25 * delta_ac * delta_ac);
  return {root, -root};
}

// ---------------------------------------------------------------------------

EvolutionGenerator::EvolutionGenerator(const CMatrix& hamiltonian, std::vector<Dissipator> dissipators,
                                       CMatrix observable, CMatrix excited_projector, CMatrix field)
    : dim_(static_cast<int>(hamiltonian.rows())),
      hamiltonian_(hamiltonian),
      dissipators_(std::move(dissipators)),
      observable_(std::move(observable)),
      excited_(std::move(excited_projector)),
      field_(std::move(field)) {
  const int d = dim_;
  const CMatrix id = CMatrix::Identity(d, d);
  std::vector<Triplet> triplets;
  add_sandwich(triplets, hamiltonian_, id, -kI);
  add_sandwich(triplets, id, hamiltonian_, kI);
  for (const auto& [rate, c] : dissipators_) {
    const CMatrix cd = c.adjoint();
    const CMatrix cdc = cd * c;
    add_sandwich(triplets, c, cd, 2.0 * rate);
    add_sandwich(triplets, cdc, id, -rate);
    add_sandwich(triplets, id, cdc, -rate);
  }
  matrix_.resize(d * d, d * d);
  matrix_.setFromTriplets(triplets.begin(), triplets.end());
  matrix_.prune(cplx{0.0, 0.0});
  matrix_.makeCompressed();
}

CVector EvolutionGenerator::apply(const CVector& vec_rho) const { return matrix_ * vec_rho; }

CMatrix EvolutionGenerator::apply(const CMatrix& rho) const { return unvec(matrix_ * vec(rho), dim_); }

double EvolutionGenerator::norm() const { return matrix_.norm(); }

EvolutionGenerator build_generator(const SystemParams& params, double g) {
  params.validate();
  const int levels = params.fock_cutoff + 1;
  const int d = 2 * levels;
  CMatrix a = CMatrix::Zero(d, d);
  CMatrix sigma = CMatrix::Zero(d, d);
  for (int n = 0; n < levels; ++n) {
    if (n + 1 < levels) {
      for (int s = 0; s < 2; ++s) a(jc_index(n, s), jc_index(n + 1, s)) = std::sqrt(static_cast<double>(n + 1));
    }
    sigma(jc_index(n, 0), jc_index(n, 1)) = 1.0;
  }
  const CMatrix ad = a.adjoint();
  const CMatrix sd = sigma.adjoint();
  const CMatrix phi = ad * sigma + sd * a;
  const CMatrix excited = sd * sigma;
  const CMatrix number = ad * a;

  CMatrix h = -params.delta_probe * excited + params.cavity_probe_detuning() * number + g * phi +
              params.drive * ad + std::conj(params.drive) * a;
  std::vector<Dissipator> diss{{params.kappa, a}, {params.gamma, sigma}};
  return EvolutionGenerator(h, std::move(diss), phi, excited, a);
}

// ---------------------------------------------------------------------------

DensityState::DensityState(CMatrix rho) : rho_(std::move(rho)) {}

cplx DensityState::expectation(const CMatrix& op) const { return trace_product(op, rho_); }

double DensityState::invariant_violation() const {
  const double trace_err = std::abs(rho_.trace() - 1.0);
  const double herm_err = (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff();
  const CMatrix h = 0.5 * (rho_ + rho_.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h, Eigen::EigenvaluesOnly);
  const double neg = std::max(0.0, -es.eigenvalues().minCoeff());
  return std::max({trace_err, herm_err, neg});
}

// ---------------------------------------------------------------------------

BorderedSolver::BorderedSolver(const EvolutionGenerator& gen) : dim_(gen.dimension()) {
  const int d = dim_;
  const SparseCMatrix& l = gen.matrix();
  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(l.nonZeros()) + d);
  for (int col = 0; col < l.outerSize(); ++col) {
    for (SparseCMatrix::InnerIterator it(l, col); it; ++it) {
      if (it.row() != 0) triplets.emplace_back(static_cast<int>(it.row()), col, it.value());
    }
  }
  for (int k = 0; k < d; ++k) triplets.emplace_back(0, k * (d + 1), 1.0);
  SparseCMatrix bordered(d * d, d * d);
  bordered.setFromTriplets(triplets.begin(), triplets.end());
  bordered.makeCompressed();
  lu_.compute(bordered);
  if (lu_.info() != Eigen::Success) {
    throw SolveFailure("bordered Liouvillian factorisation failed: " + lu_.lastErrorMessage());
  }
}

CVector BorderedSolver::solve(const CVector& source, cplx trace_value) const {
  CVector rhs = source;
  rhs(0) = trace_value;
  CVector x = lu_.solve(rhs);
  if (!x.allFinite()) throw SolveFailure("bordered Liouvillian solve produced non-finite values");
  return x;
}

CMatrix BorderedSolver::solve(const CMatrix& source, cplx trace_value) const {
  return unvec(solve(vec(source), trace_value), dim_);
}

DensityState steady_state(const EvolutionGenerator& gen, const BorderedSolver& solver) {
  const int d = gen.dimension();
  CMatrix rho = solver.solve(CMatrix(CMatrix::Zero(d, d)), 1.0);
  rho = 0.5 * (rho + rho.adjoint());
  rho /= rho.trace().real();
  const double residual = gen.apply(vec(rho)).norm();
  if (!(residual < 1e-9 * gen.norm())) {
    throw SolveFailure("steady state residual " + std::to_string(residual) + " exceeds tolerance");
  }
  return DensityState(std::move(rho));
}

DensityState steady_state(const EvolutionGenerator& gen) { return steady_state(gen, BorderedSolver(gen)); }

CouplingPointData static_expectations(const DensityState& rho, const EvolutionGenerator& gen) {
  CouplingPointData out;
  out.mean_phi = rho.expectation(gen.observable()).real();
  out.excited_pop = rho.expectation(gen.excited_projector()).real();
  if (gen.field().size() != 0) {
    out.field_amp = rho.expectation(gen.field());
    out.photon_number = rho.expectation(gen.field().adjoint() * gen.field()).real();
  }
  return out;
}

double integrated_symmetric_correlation(const EvolutionGenerator& gen, const DensityState& rho,
                                        const BorderedSolver& solver) {
  const int d = gen.dimension();
  const CMatrix& r = rho.matrix();
  const cplx mean = rho.expectation(gen.observable());
  const CMatrix dphi = gen.observable() - mean.real() * CMatrix::Identity(d, d);
  const CMatrix source = -0.5 * (dphi * r + r * dphi);
  const CMatrix x = solver.solve(source, 0.0);
  double xi = trace_product(dphi, x).real();
  if (!std::isfinite(xi)) throw SingularLiouvillian("symmetric correlation integral is not finite");
  if (std::abs(xi) < 1e-12) xi = 0.0;
  return xi;
}

double integrated_symmetric_correlation(const EvolutionGenerator& gen, const DensityState& rho) {
  return integrated_symmetric_correlation(gen, rho, BorderedSolver(gen));
}

double integrated_weighted_commutator(const EvolutionGenerator& gen, const DensityState& rho,
                                      const BorderedSolver& solver) {
  const CMatrix& r = rho.matrix();
  const CMatrix& phi = gen.observable();
  const CMatrix source = phi * r - r * phi;
  const CMatrix first = solver.solve(source, 0.0);
  const CMatrix second = solver.solve(first, 0.0);
  const cplx chi = kI * trace_product(phi, second);
  if (!std::isfinite(chi.real())) throw SingularLiouvillian("weighted commutator integral is not finite");
  return chi.real();
}

double integrated_weighted_commutator(const EvolutionGenerator& gen, const DensityState& rho) {
  return integrated_weighted_commutator(gen, rho, BorderedSolver(gen));
}

double top_fock_population(const DensityState& rho, const EvolutionGenerator& gen) {
  const int cutoff = gen.fock_cutoff();
  if (cutoff < 0) return 0.0;
  const CMatrix& m = rho.matrix();
  return m(jc_index(cutoff, 0), jc_index(cutoff, 0)).real() + m(jc_index(cutoff, 1), jc_index(cutoff, 1)).real();
}

CouplingPointData solve_coupling_point(const EvolutionGenerator& gen, double g) {
  const BorderedSolver solver(gen);
  const DensityState rho = steady_state(gen, solver);
  const double top = top_fock_population(rho, gen);
  if (top > kTopPopulationLimit) throw CutoffTooSmall(g, gen.fock_cutoff(), top);
  CouplingPointData out = static_expectations(rho, gen);
  out.g = g;
  out.xi = integrated_symmetric_correlation(gen, rho, solver);
  out.chi = integrated_weighted_commutator(gen, rho, solver);
  return out;
}

CouplingPointData solve_coupling_point(const SystemParams& params, double g) {
  return solve_coupling_point(build_generator(params, g), g);
}

// ---------------------------------------------------------------------------

RecoilTensor recoil_tensor() {
  // Polar axis along x: k.x = cos(theta), k_y = sin(theta) cos(phi), k_z = sin(theta) sin(phi).
  const auto [nodes, weights] = numerics::gauss_legendre(16);
  constexpr int n_phi = 32;
  RecoilTensor e;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double c = nodes[i];
    const double s2 = 1.0 - c * c;
    const double pattern = 0.5 * (1.0 + c * c);
    for (int j = 0; j < n_phi; ++j) {
      const double phi = units::two_pi * j / n_phi;
      const double w = weights[i] * (units::two_pi / n_phi) * pattern;
      e.exx += w * c * c;
      e.eyy += w * s2 * std::cos(phi) * std::cos(phi);
      e.ezz += w * s2 * std::sin(phi) * std::sin(phi);
    }
  }
  const double norm = 3.0 / (8.0 * units::pi);
  e.exx *= norm;
  e.eyy *= norm;
  e.ezz *= norm;
  return e;
}

ValidityReport validity_report(const SystemParams& params, double delta_p) {
  if (!(delta_p > 0.0)) throw ValidationError("delta_p");
  const double k = params.wavenumber();
  const double hbar_m = units::hbar_over_mass(params.mass);
  const double recoil = 0.5 * hbar_m * k * k;
  ValidityReport r;
  r.recoil_over_gamma = recoil / params.gamma;
  r.recoil_over_kappa = recoil / params.kappa;
  r.epsilon1 = 1.0 / delta_p;
  r.epsilon2 = hbar_m * k * k * delta_p / std::min(params.gamma, params.kappa);
  return r;
}

}  // namespace cqed
