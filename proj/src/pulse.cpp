#include "qcrab/pulse.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>

#include "qcrab/quantum.hpp"

namespace qcrab {

namespace {

// u^p for even p >= 2 by squaring on u^2.
double even_pow(double u, int p) {
  double base = u * u;
  int e = p / 2;
  double r = 1.0;
  while (e > 0) {
    if (e & 1) r *= base;
    base *= base;
    e >>= 1;
  }
  return r;
}

double basis_sum(double t, const CrabParams& params) {
  double s = 0.0;
  for (int n = 0; n < params.N; ++n) {
    double arg = two_pi * params.omega[n] * t;
    s += params.a[n] * std::sin(arg) + params.b[n] * std::cos(arg);
  }
  return s;
}

}  // namespace

void CrabParams::validate() const {
  if (N < 1) throw domain_error("CrabParams: N must be >= 1");
  if (a.size() != static_cast<size_t>(N) || b.size() != static_cast<size_t>(N) ||
      omega.size() != static_cast<size_t>(N))
    throw domain_error("CrabParams: coefficient vectors must have length N");
  if (p < 2 || p % 2 != 0) throw domain_error("CrabParams: p must be even and >= 2");
  if (T <= 0) throw domain_error("CrabParams: T must be > 0");
  if (g0 <= 0) throw domain_error("CrabParams: g0 must be > 0");
  if (c_f < 0) throw domain_error("CrabParams: c_f must be >= 0");
  for (double w : omega)
    if (!(w > 0)) throw domain_error("CrabParams: frequencies must be > 0");
}

double boundary_envelope(double t_ns, double T_ns, int p) {
  if (t_ns < 0 || t_ns > T_ns)
    throw domain_error("boundary_envelope: t outside [0, T]");
  if (p < 2 || p % 2 != 0)
    throw domain_error("boundary_envelope: p must be even and >= 2");
  double h = T_ns / 2.0;
  return 1.0 - even_pow((t_ns - h) / h, p);
}

double crab_correction(double t_ns, const CrabParams& params) {
  double env = boundary_envelope(t_ns, params.T, params.p);
  return env / (2.0 * params.N) * basis_sum(t_ns, params);
}

double control_amplitude(double t_ns, const CrabParams& params) {
  return params.g0 * crab_correction(t_ns, params);
}

PulseWaveform sample_waveform(const CrabParams& params, double dt_ns) {
  if (!(dt_ns > 0) || dt_ns > params.T / 10.0)
    throw bad_step("sample_waveform: need 0 < dt <= T/10");
  long m = std::lround(params.T / dt_ns);
  PulseWaveform w;
  w.dt = dt_ns;
  w.T = params.T;
  w.samples.resize(m + 1);
  for (long k = 0; k <= m; ++k) {
    double t = k * dt_ns;
    // Grid points that round past T read 0: the pulse has ended.
    w.samples[k] = t >= params.T ? 0.0 : control_amplitude(t, params);
  }
  w.samples.back() = 0.0;
  return w;
}

double max_abs_amplitude(const PulseWaveform& w) {
  if (w.samples.empty()) throw domain_error("max_abs_amplitude: empty waveform");
  double m = 0.0;
  for (double s : w.samples) m = std::max(m, std::abs(s));
  return m;
}

void midpoint_amplitudes(const CrabParams& params, long n_steps, double dt_ns,
                         std::vector<double>& out) {
  out.resize(n_steps);
  // One unit-modulus phasor per basis frequency, advanced by a fixed complex
  // rotation per step; Im/Re give the sine/cosine terms without per-sample
  // trig calls. Accumulated rounding over ~1e5 steps stays below 1e-10.
  const int N = params.N;
  std::vector<std::complex<double>> z(N), rot(N);
  for (int n = 0; n < N; ++n) {
    double w = two_pi * params.omega[n];
    z[n] = std::polar(1.0, w * (0.5 * dt_ns));
    rot[n] = std::polar(1.0, w * dt_ns);
  }
  const double h = params.T / 2.0;
  const double scale = params.g0 / (2.0 * N);
  for (long k = 0; k < n_steps; ++k) {
    double t = (k + 0.5) * dt_ns;
    double s = 0.0;
    for (int n = 0; n < N; ++n) {
      s += params.a[n] * z[n].imag() + params.b[n] * z[n].real();
      z[n] *= rot[n];
    }
    double env = t >= params.T ? 0.0 : 1.0 - even_pow((t - h) / h, params.p);
    out[k] = scale * env * s;
  }
}

double bang_bang_min_time(double omega_L_mhz, double Omega_mhz) {
  if (omega_L_mhz == 0 && Omega_mhz == 0)
    throw domain_error("bang_bang_min_time: omega_L and Omega both zero");
  double fl = omega_L_mhz * 1e-3;  // GHz
  double fo = Omega_mhz * 1e-3;
  double pi = two_pi / 2.0;
  return pi / std::hypot(pi * fl, two_pi * fo);
}

CrabParams scaled_params(const CrabParams& params, double factor) {
  if (!(factor > 0)) throw domain_error("scaled_params: factor must be > 0");
  CrabParams s = params;
  s.T = params.T / factor;
  s.g0 = params.g0 * factor;
  for (double& w : s.omega) w *= factor;
  return s;
}

}  // namespace qcrab
