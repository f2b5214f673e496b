#pragma once

#include <complex>
#include <Eigen/Dense>

#include "qcrab/errors.hpp"

namespace qcrab {

using complexd = std::complex<double>;

constexpr double two_pi = 6.283185307179586476925286766559;

// Phase accumulated by a linear frequency f (MHz) over a time t (ns).
// Every phase in the library goes through this convention.
inline double phase_rad(double f_mhz, double t_ns) {
  return two_pi * f_mhz * t_ns * 1e-3;
}

// Pure state of the spin qubit (dim 2) or the full spin-1 triplet (dim 3).
// Basis order is (|0>, |-1>) resp. (|0>, |-1>, |+1>), so the qubit subspace
// is always the leading 2x2 block.
struct QuantumState {
  Eigen::VectorXcd a;

  explicit QuantumState(Eigen::VectorXcd amplitudes);
  static QuantumState normalized(Eigen::VectorXcd amplitudes);

  int dim() const { return static_cast<int>(a.size()); }
};

// Convenience kets.
QuantumState ket0(int dim = 2);
QuantumState ket_minus1(int dim = 2);
// (|0> + e^{i phase}|-1>)/sqrt(2)
QuantumState ket_equator(double phase_rad = 0.0);

// Qubit density matrix over {|0>, |-1>}.
struct DensityMatrix {
  Eigen::Matrix2cd m;

  explicit DensityMatrix(Eigen::Matrix2cd entries);
};

struct BlochVector {
  double x = 0, y = 0, z = 0;
};

// Spin-1 operators in basis (|0>, |-1>, |+1>), satisfying [Sx,Sy] = i Sz.
struct SpinOperators {
  Eigen::Matrix3cd Sx, Sy, Sz;
};

SpinOperators spin1_operators();

// Projection of |psi><psi| onto the qubit subspace, renormalized.
// Throws leakage_error if the |+1> population is >= 0.01.
DensityMatrix density_from_state(const QuantumState& psi);

// F = sqrt(<target| rho |target>); target must be a 2-level pure state.
double fidelity(const QuantumState& target, const DensityMatrix& rho);

// f = |<psi|phi>|^2; note f = F^2 for pure states.
double overlap_probability(const QuantumState& psi, const QuantumState& phi);

// Inverts rho = 1/2 [[1+z, x+iy], [x-iy, 1-z]]:
// z = rho00 - rho11, x = 2 Re rho01, y = 2 Im rho01.
BlochVector bloch_from_density(const DensityMatrix& rho);

// The parameterization inverted by bloch_from_density.
DensityMatrix density_from_bloch(const BlochVector& b);

// Free Larmor evolution of the qubit density matrix for tau ns:
// rho01 *= e^{+i phi}, rho10 *= e^{-i phi} with phi = 2 pi omega_L tau 1e-3,
// i.e. conjugation by U = diag(1, e^{-i phi}). Diagonal unchanged.
DensityMatrix free_phase_evolve(const DensityMatrix& rho, double tau_ns,
                                double omega_L_mhz);

// 1/2 ||rho1 - rho2||_1 for qubit density matrices.
double trace_distance(const DensityMatrix& rho1, const DensityMatrix& rho2);

}  // namespace qcrab
