#pragma once

#include <vector>

#include "qcrab/errors.hpp"

namespace qcrab {

// Chopped-random-basis control parameter set. The control amplitude is
//   Gamma_x(t) = g0 * env(t)/(2N) * sum_n [a_n sin(2 pi w_n t) + b_n cos(2 pi w_n t)]
// with w_n in GHz and t in ns, so the sine arguments are already in radians.
struct CrabParams {
  int N = 0;                    // basis size (frequency count)
  std::vector<double> a;        // sine coefficients, dimensionless
  std::vector<double> b;        // cosine coefficients, dimensionless
  std::vector<double> omega;    // basis frequencies, GHz
  double T = 0;                 // pulse duration, ns
  int p = 2;                    // even boundary exponent
  double g0 = 0;                // guess amplitude, MHz
  double c_f = 0;               // amplitude-penalty weight, dimensionless

  // Throws domain_error on any violated invariant.
  void validate() const;
};

// Uniformly sampled control amplitude.
struct PulseWaveform {
  double dt = 0;                 // sample interval, ns
  std::vector<double> samples;   // Gamma_x values, MHz
  double T = 0;                  // pulse duration, ns
};

// 1/lambda(t) = 1 - ((t-h)/h)^p with h = T/2, evaluated in closed form
// (lambda itself diverges at the endpoints and is never materialized).
// Value in [0,1], exactly 0 at t=0 and t=T, exactly 1 at t=T/2.
double boundary_envelope(double t_ns, double T_ns, int p);

// g(t): the bounded Fourier-like correction, dimensionless.
double crab_correction(double t_ns, const CrabParams& params);

// Gamma_x(t) = g0 * g(t), MHz.
double control_amplitude(double t_ns, const CrabParams& params);

// Samples control_amplitude at t = k*dt for k = 0..round(T/dt); grid points
// that land past T due to rounding read as 0 (the pulse has ended).
PulseWaveform sample_waveform(const CrabParams& params, double dt_ns);

// max_t |Gamma_x(t)| over the samples.
double max_abs_amplitude(const PulseWaveform& w);

// Gamma_x at the n_steps midpoints (k+1/2)*dt, evaluated with per-frequency
// phasor recurrences; used by the propagation hot path. Cross-checked against
// control_amplitude in the tests. `out` is resized.
void midpoint_amplitudes(const CrabParams& params, long n_steps, double dt_ns,
                         std::vector<double>& out);

// Minimal pi time of bang-bang control at amplitude cap Omega:
// T = pi / sqrt((pi w_L)^2 + (2 pi Omega)^2) with frequencies in GHz.
double bang_bang_min_time(double omega_L_mhz, double Omega_mhz);

// Same pulse re-timed for a transition frequency scaled by `factor`:
// T /= factor, omega *= factor, g0 *= factor. The resulting unitary on the
// rescaled system is identical.
CrabParams scaled_params(const CrabParams& params, double factor);

}  // namespace qcrab
