#pragma once

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "qcrab/pulse.hpp"
#include "qcrab/quantum.hpp"

namespace qcrab {

// Static description of the spin system. All frequencies are linear MHz.
// omega_z is derived from the measured transition frequency, not from B0;
// B0 is carried as metadata only.
struct SpinSystem {
  double D = 2870.0;     // zero-field splitting
  double omega_L = 0;    // |0> <-> |-1> transition frequency
  int levels = 2;
  double B0 = 0;         // gauss, informational

  double omega_z() const { return D - omega_L; }
  void validate() const;
};

struct PropagationResult {
  QuantumState psi_final;
  std::vector<std::pair<double, QuantumState>> trajectory;
  long steps = 0;
};

struct PropagateOptions {
  // Record (t, psi) every `trajectory_stride` steps (0 = no trajectory).
  // The initial state is recorded at t=0 and the final state at t=T.
  long trajectory_stride = 0;
  // When set, re-propagate at dt/2 and throw step_too_large if the final
  // overlap |<psi(dt)|psi(dt/2)>|^2 deviates from 1 by more than 1e-8.
  bool convergence_check = false;
};

// H(Gamma) for the configured level count:
//   2-level: [[0, Gamma], [Gamma, omega_L]]
//   3-level: D Sz^2 + omega_z Sz + sqrt(2) Gamma Sx
using ControlFn = std::function<double(double)>;
Eigen::MatrixXcd hamiltonian_at(double t_ns, const ControlFn& gamma,
                                const SpinSystem& sys);

// Piecewise-constant evolution with midpoint-sampled Gamma and the exact
// step unitary U = exp(-i 2 pi H(t_mid) dt 1e-3).
PropagationResult propagate(const QuantumState& psi0, const CrabParams& pulse,
                            const SpinSystem& sys, double dt_ns,
                            const PropagateOptions& opts = {});
PropagationResult propagate(const QuantumState& psi0, const PulseWaveform& w,
                            const SpinSystem& sys, double dt_ns,
                            const PropagateOptions& opts = {});
PropagationResult propagate(const QuantumState& psi0, const ControlFn& gamma,
                            double T_ns, const SpinSystem& sys, double dt_ns,
                            const PropagateOptions& opts = {});

// Exact free evolution: relative phase 2 pi omega_L tau 1e-3 between |0> and
// |-1> (and the corresponding phase on |+1> in 3-level mode).
QuantumState propagate_free(const QuantumState& psi, double tau_ns,
                            const SpinSystem& sys);

// |f2 - f3|: overlap with `target` after propagating |0> under `pulse` in the
// 2-level and the full 3-level model (target embedded with zero |+1>
// amplitude). Validates the qubit-subspace approximation.
double two_vs_three_level_check(const CrabParams& pulse,
                                const QuantumState& target,
                                const SpinSystem& sys, double dt_ns);

// Low-level kernels. These accept an arbitrary (possibly negative) transition
// frequency and a precomputed midpoint amplitude array; the high-level
// overloads above are thin wrappers. Exposed for the experiments module and
// for integrator sanity tests (e.g. time reversal).
Eigen::Vector2cd propagate_two_level_raw(Eigen::Vector2cd psi,
                                         std::span<const double> mid_amps,
                                         double omega_mhz, double dt_ns);
Eigen::Matrix2cd pulse_unitary_two_level(std::span<const double> mid_amps,
                                         double omega_mhz, double dt_ns);
Eigen::Vector3cd propagate_three_level_raw(Eigen::Vector3cd psi,
                                           std::span<const double> mid_amps,
                                           const SpinSystem& sys,
                                           double dt_ns);

}  // namespace qcrab
