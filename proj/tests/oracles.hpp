#pragma once

// Independent reference computations used only by the tests: dense
// eigen-decomposition, explicit time propagation and time-domain quadrature.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

#include "cqed/quantum_core.hpp"
#include "cqed/units.hpp"

namespace oracle {

using cqed::CMatrix;
using cqed::cplx;
using cqed::CVector;

inline CMatrix dense(const cqed::EvolutionGenerator& gen) { return CMatrix(gen.matrix()); }

inline CMatrix unvec(const CVector& v, int d) {
  CMatrix m(d, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) m(i, j) = v(i + d * j);
  return m;
}

inline CVector vec(const CMatrix& m) {
  const int d = static_cast<int>(m.rows());
  CVector v(d * d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) v(i + d * j) = m(i, j);
  return v;
}

/// Row vector r with r . vec(X) = Tr[op X].
inline Eigen::RowVectorXcd trace_functional(const CMatrix& op) {
  return vec(op.transpose()).transpose();
}

struct Spectral {
  Eigen::VectorXcd lambda;
  CMatrix V, Vinv;
  int zero_mode = 0;
};

/// Orthonormal basis of Hermitian d x d matrices, as vectorized columns.
/// The generator maps Hermitian to Hermitian, so it is real in this basis.
inline CMatrix hermitian_basis(int d) {
  CMatrix T = CMatrix::Zero(d * d, d * d);
  const double r = 1.0 / std::sqrt(2.0);
  int k = 0;
  for (int i = 0; i < d; ++i) T(i + d * i, k++) = 1.0;
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      T(i + d * j, k) = r;
      T(j + d * i, k++) = r;
      T(i + d * j, k) = cplx(0, r);
      T(j + d * i, k++) = cplx(0, -r);
    }
  return T;
}

inline Spectral decompose(const cqed::EvolutionGenerator& gen) {
  const int d = static_cast<int>(gen.hamiltonian().rows());
  const CMatrix T = hermitian_basis(d);
  const Eigen::MatrixXd R = (T.adjoint() * dense(gen) * T).real();
  Eigen::EigenSolver<Eigen::MatrixXd> es(R);
  Spectral s;
  s.lambda = es.eigenvalues();
  const CMatrix Vr = es.eigenvectors();
  s.V = T * Vr;
  s.Vinv = Vr.inverse() * T.adjoint();
  Eigen::Index k = 0;
  s.lambda.cwiseAbs().minCoeff(&k);
  s.zero_mode = static_cast<int>(k);
  return s;
}

/// Steady state from the eigenvector of the eigenvalue closest to zero.
inline CMatrix null_vector_state(const cqed::EvolutionGenerator& gen, const Spectral& s) {
  const int d = static_cast<int>(gen.hamiltonian().rows());
  CMatrix rho = unvec(s.V.col(s.zero_mode), d);
  rho /= rho.trace();
  return 0.5 * (rho + rho.adjoint());
}

/// Classical RK4 from the ground state with no photons.
inline CMatrix rk4_state(const cqed::EvolutionGenerator& gen, double horizon, double h) {
  const int d = static_cast<int>(gen.hamiltonian().rows());
  const CMatrix L = dense(gen);
  CVector x = CVector::Zero(d * d);
  x(0) = 1.0;
  const int steps = static_cast<int>(std::ceil(horizon / h));
  h = horizon / steps;
  for (int i = 0; i < steps; ++i) {
    const CVector k1 = L * x;
    const CVector k2 = L * (x + 0.5 * h * k1);
    const CVector k3 = L * (x + 0.5 * h * k2);
    const CVector k4 = L * (x + h * k3);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  CMatrix rho = unvec(x, d);
  return rho / rho.trace();
}

struct Correlations {
  double xi = 0.0;
  double chi = 0.0;
};

/// xi and chi by composite Simpson quadrature of C(tau) = <Phi(tau) Phi(0)>,
/// evaluated mode by mode from the eigen-decomposition, to T = 30 max(1/gamma, 1/kappa).
inline Correlations quadrature(const cqed::EvolutionGenerator& gen, double gamma, double kappa) {
  const Spectral s = decompose(gen);
  const CMatrix rho = null_vector_state(gen, s);
  const CMatrix& phi = gen.observable();
  const Eigen::RowVectorXcd left = trace_functional(phi) * s.V;
  const CVector right = s.Vinv * vec(phi * rho);
  const int n = static_cast<int>(s.lambda.size());
  double lmax = 0.0;
  for (int j = 0; j < n; ++j) lmax = std::max(lmax, std::abs(s.lambda(j)));
  const double T = 30.0 * std::max(1.0 / gamma, 1.0 / kappa);
  int steps = static_cast<int>(std::ceil(T * lmax / 0.05));
  steps += steps % 2;
  const double h = T / steps;

  // The composite Simpson sums of c q^i and c i q^i are geometric and
  // arithmetic-geometric series in q = exp(lambda h), summed in closed form.
  auto one_minus = [](cplx lh) {  // 1 - exp(lh) without cancellation
    const double a = lh.real(), b = lh.imag();
    const double s2 = std::sin(0.5 * b);
    return -cplx(std::expm1(a) * std::cos(b) - 2.0 * s2 * s2, std::exp(a) * std::sin(b));
  };
  auto geo = [&](cplx lh, int m) {  // sum_{j=0}^{m} q^j
    return (1.0 - std::exp(lh * double(m + 1))) / one_minus(lh);
  };
  auto arith = [&](cplx lh, int m) {  // sum_{j=0}^{m} j q^j
    const cplx q = std::exp(lh), d = one_minus(lh);
    return q * (1.0 - double(m + 1) * std::exp(lh * double(m)) + double(m) * std::exp(lh * double(m + 1))) / (d * d);
  };
  const int half = steps / 2 - 1;
  double sum_re = 0.0, sum_tau_im = 0.0;
  for (int j = 0; j < n; ++j) {
    if (j == s.zero_mode) continue;  // drops the <Phi>^2 term
    const cplx c = left(j) * right(j);
    const cplx lh = s.lambda(j) * h;
    const cplx q = std::exp(lh), qn = std::exp(lh * double(steps));
    const cplx s0 = 2.0 * geo(lh, steps) - 1.0 - qn + 2.0 * q * geo(2.0 * lh, half);
    const cplx s1 = 2.0 * arith(lh, steps) - double(steps) * qn +
                    2.0 * q * (2.0 * arith(2.0 * lh, half) + geo(2.0 * lh, half));
    sum_re += (c * s0).real();
    sum_tau_im += h * (c * s1).imag();
  }
  // chi = i int tau <[Phi(tau), Phi]> = -2 int tau Im C
  return {sum_re * h / 3.0, -2.0 * sum_tau_im * h / 3.0};
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace oracle
