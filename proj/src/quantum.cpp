#include "qcrab/quantum.hpp"

#include <algorithm>
#include <cmath>

namespace qcrab {

namespace {

constexpr double norm_tol = 1e-6;

void check_dim(const Eigen::VectorXcd& v) {
  if (v.size() != 2 && v.size() != 3)
    throw dimension_mismatch("QuantumState dimension must be 2 or 3");
}

}  // namespace

QuantumState::QuantumState(Eigen::VectorXcd amplitudes) : a(std::move(amplitudes)) {
  check_dim(a);
  if (std::abs(a.norm() - 1.0) > norm_tol)
    throw domain_error("QuantumState amplitudes not normalized");
}

QuantumState QuantumState::normalized(Eigen::VectorXcd amplitudes) {
  check_dim(amplitudes);
  double n = amplitudes.norm();
  if (n <= 0) throw domain_error("cannot normalize a zero vector");
  return QuantumState(amplitudes / n);
}

QuantumState ket0(int dim) {
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(dim);
  v(0) = 1.0;
  return QuantumState(std::move(v));
}

QuantumState ket_minus1(int dim) {
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(dim);
  v(1) = 1.0;
  return QuantumState(std::move(v));
}

QuantumState ket_equator(double phase) {
  Eigen::VectorXcd v(2);
  const double r = 1.0 / std::sqrt(2.0);
  v(0) = r;
  v(1) = r * std::polar(1.0, phase);
  return QuantumState(std::move(v));
}

DensityMatrix::DensityMatrix(Eigen::Matrix2cd entries) : m(std::move(entries)) {
  const double tol = 1e-9;
  if ((m - m.adjoint()).cwiseAbs().maxCoeff() > tol)
    throw domain_error("DensityMatrix not Hermitian");
  if (std::abs(m.trace().real() - 1.0) > tol || std::abs(m.trace().imag()) > tol)
    throw domain_error("DensityMatrix trace != 1");
  // 2x2 Hermitian eigenvalues in closed form.
  double mean = 0.5 * m.trace().real();
  double det = (m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0)).real();
  double disc = std::sqrt(std::max(0.0, mean * mean - det));
  if (mean - disc < -tol)
    throw domain_error("DensityMatrix not positive semidefinite");
}

SpinOperators spin1_operators() {
  // Standard spin-1 matrices in the m = (+1, 0, -1) ladder basis, permuted to
  // this library's (|0>, |-1>, |+1>) order.
  const double r = 1.0 / std::sqrt(2.0);
  const complexd i(0.0, 1.0);
  SpinOperators ops;
  ops.Sx.setZero();
  ops.Sx(0, 1) = r; ops.Sx(1, 0) = r;
  ops.Sx(0, 2) = r; ops.Sx(2, 0) = r;
  ops.Sy.setZero();
  ops.Sy(0, 1) = -i * r; ops.Sy(1, 0) = i * r;
  ops.Sy(0, 2) = i * r;  ops.Sy(2, 0) = -i * r;
  ops.Sz.setZero();
  ops.Sz(1, 1) = -1.0;
  ops.Sz(2, 2) = 1.0;
  return ops;
}

DensityMatrix density_from_state(const QuantumState& psi) {
  Eigen::Vector2cd q(psi.a(0), psi.a(1));
  if (psi.dim() == 3) {
    double leak = std::norm(psi.a(2));
    if (leak >= 0.01)
      throw leakage_error("|+1> population " + std::to_string(leak) +
                          " >= 0.01; qubit-subspace projection would be lossy");
    q /= q.norm();
  }
  return DensityMatrix(q * q.adjoint());
}

double fidelity(const QuantumState& target, const DensityMatrix& rho) {
  if (target.dim() != 2)
    throw dimension_mismatch("fidelity target must be a 2-level state");
  Eigen::Vector2cd t(target.a(0), target.a(1));
  double p = (t.adjoint() * rho.m * t)(0).real();
  return std::sqrt(std::clamp(p, 0.0, 1.0));
}

double overlap_probability(const QuantumState& psi, const QuantumState& phi) {
  if (psi.dim() != phi.dim())
    throw dimension_mismatch("overlap_probability: dimensions differ");
  return std::norm(psi.a.dot(phi.a));
}

BlochVector bloch_from_density(const DensityMatrix& rho) {
  BlochVector b;
  b.z = (rho.m(0, 0) - rho.m(1, 1)).real();
  b.x = 2.0 * rho.m(0, 1).real();
  b.y = 2.0 * rho.m(0, 1).imag();
  return b;
}

DensityMatrix density_from_bloch(const BlochVector& b) {
  Eigen::Matrix2cd m;
  m(0, 0) = 0.5 * (1.0 + b.z);
  m(1, 1) = 0.5 * (1.0 - b.z);
  m(0, 1) = 0.5 * complexd(b.x, b.y);
  m(1, 0) = 0.5 * complexd(b.x, -b.y);
  return DensityMatrix(m);
}

DensityMatrix free_phase_evolve(const DensityMatrix& rho, double tau_ns,
                                double omega_L_mhz) {
  if (tau_ns < 0) throw domain_error("free_phase_evolve: tau must be >= 0");
  complexd ph = std::polar(1.0, phase_rad(omega_L_mhz, tau_ns));
  Eigen::Matrix2cd m = rho.m;
  m(0, 1) *= ph;
  m(1, 0) *= std::conj(ph);
  return DensityMatrix(m);
}

double trace_distance(const DensityMatrix& rho1, const DensityMatrix& rho2) {
  // Difference of qubit density matrices is traceless Hermitian: eigenvalues
  // are +/- sqrt(-det).
  Eigen::Matrix2cd d = rho1.m - rho2.m;
  double det = (d(0, 0) * d(1, 1) - d(0, 1) * d(1, 0)).real();
  return std::sqrt(std::max(0.0, -det));
}

}  // namespace qcrab
