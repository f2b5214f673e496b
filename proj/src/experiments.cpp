#include "qcrab/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "qcrab/reference_pulses.hpp"

namespace qcrab {

namespace {

double u01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

void parallel_for(long n, int workers, const std::function<void(long)>& body) {
  long hw = static_cast<long>(std::thread::hardware_concurrency());
  long k = workers > 0 ? workers : std::max<long>(1, hw);
  k = std::min(k, n);
  if (k <= 1) {
    for (long i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<long> next{0};
  std::exception_ptr first_error;
  std::mutex err_mu;
  std::vector<std::thread> pool;
  for (long t = 0; t < k; ++t)
    pool.emplace_back([&] {
      for (long i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> g(err_mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Noisy estimate of a |0>-population from Poisson photon counting.
double readout_prob(double p0, const NoiseModel& noise, std::mt19937_64& rng) {
  p0 = std::clamp(p0, 0.0, 1.0);
  if (noise.noiseless()) return p0;
  double rate = noise.photons_per_shot * (noise.c0 * p0 + noise.c1 * (1.0 - p0));
  long counts = poisson_sample(static_cast<double>(noise.shots) * rate, rng);
  double mean_rate = static_cast<double>(counts) / static_cast<double>(noise.shots);
  double est = (mean_rate / noise.photons_per_shot - noise.c1) / (noise.c0 - noise.c1);
  return std::max(0.0, est);
}

// Rectangular carrier pulse: Gamma(u) = amp cos(2 pi nu u 1e-3 + phase) for
// local time u in [0, duration].
struct RectPulse {
  double duration = 0;  // ns
  double amp = 0;       // MHz
  double nu = 0;        // carrier frequency, MHz
  double phase = 0;     // radians
};

void rect_midpoints(const RectPulse& p, double dt_max, std::vector<double>& amps,
                    double& dt_eff) {
  long n = std::max<long>(1, static_cast<long>(std::ceil(p.duration / dt_max - 1e-12)));
  dt_eff = p.duration / n;
  amps.resize(n);
  // Phasor recurrence, same scheme as the CRAB sampler.
  std::complex<double> z = std::polar(1.0, two_pi * p.nu * 1e-3 * 0.5 * dt_eff + p.phase);
  std::complex<double> rot = std::polar(1.0, two_pi * p.nu * 1e-3 * dt_eff);
  for (long k = 0; k < n; ++k) {
    amps[k] = p.amp * z.real();
    z *= rot;
  }
}

Eigen::Vector2cd apply_rect(const Eigen::Vector2cd& psi, const RectPulse& p,
                            double omega, double dt_max) {
  std::vector<double> amps;
  double dt_eff;
  rect_midpoints(p, dt_max, amps, dt_eff);
  return propagate_two_level_raw(psi, amps, omega, dt_eff);
}

Eigen::Vector2cd apply_crab(const Eigen::Vector2cd& psi, const CrabParams& pulse,
                            double omega, double dt_max) {
  long n = std::max<long>(1, static_cast<long>(std::ceil(pulse.T / dt_max - 1e-12)));
  double dt_eff = pulse.T / n;
  std::vector<double> amps;
  midpoint_amplitudes(pulse, n, dt_eff, amps);
  return propagate_two_level_raw(psi, amps, omega, dt_eff);
}

Eigen::Vector2cd free_evolve(Eigen::Vector2cd psi, double tau, double omega) {
  psi(1) *= std::polar(1.0, -phase_rad(omega, tau));
  return psi;
}

double p0_of(const Eigen::Vector2cd& psi) {
  return std::clamp(std::norm(psi(0)) / psi.squaredNorm(), 0.0, 1.0);
}

void require_qubit_sys(const SpinSystem& sys, const char* what) {
  sys.validate();
  if (sys.levels != 2)
    throw domain_error(std::string(what) + ": requires a 2-level system");
}

void check_tau_grid(const std::vector<double>& taus) {
  if (taus.empty()) throw domain_error("empty tau grid");
  if (taus.front() < 0) throw domain_error("tau grid must be non-negative");
  for (size_t i = 1; i < taus.size(); ++i)
    if (taus[i] <= taus[i - 1])
      throw domain_error("tau grid must be strictly increasing");
}

std::vector<double> ensemble_detunings(const NoiseModel& noise) {
  if (noise.detuning_sigma <= 0) return {0.0};
  return stratified_gaussian(noise.detuning_sigma, std::max(1, noise.ensemble_size));
}

void add_meta(Trace& t, const std::string& k, const std::string& v) {
  t.metadata.emplace_back(k, v);
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

const char* to_string(Frame f) {
  switch (f) {
    case Frame::lab: return "lab";
    case Frame::rotating: return "rotating";
    case Frame::following: return "following";
  }
  return "?";
}

const char* to_string(PulseKind k) {
  return k == PulseKind::crab ? "crab" : "rectangular";
}

void NoiseModel::validate() const {
  if (photons_per_shot < 0) throw domain_error("noise: photons_per_shot must be >= 0");
  if (photons_per_shot > 0 && shots < 1)
    throw domain_error("noise: shots must be >= 1 when photons_per_shot > 0");
  if (detuning_sigma < 0) throw domain_error("noise: detuning_sigma must be >= 0");
  if (ensemble_size < 1) throw domain_error("noise: ensemble_size must be >= 1");
  if (!(c0 > c1)) throw domain_error("noise: need c0 > c1 for readout contrast");
}

long poisson_sample(double lambda, std::mt19937_64& rng) {
  if (lambda <= 0) return 0;
  // Count exponential arrivals until their sum exceeds lambda. O(lambda) but
  // free of platform-dependent branches, so streams are reproducible.
  double acc = 0;
  long k = -1;
  while (acc < lambda) {
    acc += -std::log1p(-u01(rng));
    ++k;
  }
  return k;
}

double readout(const QuantumState& psi, const NoiseModel& noise,
               std::mt19937_64& rng) {
  noise.validate();
  return readout_prob(std::norm(psi.a(0)), noise, rng);
}

double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw domain_error("inverse_normal_cdf: p must be in (0,1)");
  // Acklam's rational approximation, then one Halley refinement against the
  // erfc-based CDF; accurate to ~1e-15 over the open interval.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425, phigh = 1 - plow;
  double x;
  if (p < plow) {
    double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= phigh) {
    double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    double q = std::sqrt(-2 * std::log(1 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  double u = e * std::sqrt(two_pi) * std::exp(x * x / 2.0);
  return x - u / (1 + x * u / 2);
}

std::vector<double> stratified_gaussian(double sigma, int m) {
  if (m < 1) throw domain_error("stratified_gaussian: m must be >= 1");
  std::vector<double> out(m);
  for (int i = 0; i < m; ++i)
    out[i] = sigma * inverse_normal_cdf((i + 0.5) / m);
  return out;
}

std::vector<double> uniform_grid(double t0, double t1, double step) {
  if (!(step > 0) || t1 < t0) throw domain_error("uniform_grid: bad range");
  long n = static_cast<long>(std::floor((t1 - t0) / step + 0.5));
  std::vector<double> out(n + 1);
  for (long k = 0; k <= n; ++k) out[k] = t0 + k * step;
  return out;
}

Trace rabi_sweep(double omega_d, double omega_L, double t_max,
                 double dt_sample, const NoiseModel& noise, std::uint64_t seed,
                 double dt_prop) {
  if (omega_d < 0) throw domain_error("rabi_sweep: omega_d must be >= 0");
  if (!(dt_sample > 0) || !(t_max >= 0)) throw domain_error("rabi_sweep: bad grid");
  noise.validate();
  SpinSystem sys{.D = 2870.0, .omega_L = omega_L, .levels = 2, .B0 = 0};
  sys.validate();

  Trace tr;
  tr.times = uniform_grid(0.0, t_max, dt_sample);
  tr.signal.resize(tr.times.size());
  std::mt19937_64 rng(seed);

  long n_samples = static_cast<long>(tr.times.size());
  if (n_samples == 1) {
    tr.signal[0] = readout_prob(1.0, noise, rng);
  } else {
    // The drive is one continuous lab-frame cosine, so the whole sweep is a
    // single trajectory sampled every dt_sample.
    long stride = std::max<long>(1, static_cast<long>(std::ceil(dt_sample / dt_prop - 1e-12)));
    double dt_eff = dt_sample / stride;
    double T = tr.times.back();
    PropagateOptions opts;
    opts.trajectory_stride = stride;
    ControlFn drive = [&](double t) {
      return omega_d * std::cos(phase_rad(omega_L, t));
    };
    PropagationResult res = propagate(ket0(2), drive, T, sys, dt_eff, opts);
    if (res.trajectory.size() != tr.times.size())
      throw domain_error("rabi_sweep: trajectory/sample mismatch");
    for (size_t i = 0; i < tr.times.size(); ++i)
      tr.signal[i] = readout_prob(std::norm(res.trajectory[i].second.a(0)), noise, rng);
  }
  add_meta(tr, "experiment", "rabi");
  add_meta(tr, "omega_d_MHz", num(omega_d));
  add_meta(tr, "omega_L_MHz", num(omega_L));
  return tr;
}

namespace {

CrabParams default_half_pulse(const SpinSystem& sys) {
  return scaled_params(reference_pi_half(), sys.omega_L / 30.0);
}

CrabParams default_pi_pulse(const SpinSystem& sys) {
  return scaled_params(reference_pi(), sys.omega_L / 30.0);
}

}  // namespace

Trace fid(PulseKind kind, Frame frame, double delta_omega,
          const std::vector<double>& tau_grid, const SpinSystem& sys,
          const NoiseModel& noise, const FidOptions& opts, int workers) {
  require_qubit_sys(sys, "fid");
  check_tau_grid(tau_grid);
  noise.validate();
  const double nu = sys.omega_L + delta_omega;  // drive carrier
  if (!(nu > 0)) throw domain_error("fid: carrier frequency must be > 0");

  CrabParams half = opts.crab_half ? *opts.crab_half : default_half_pulse(sys);
  const bool crab_first = kind == PulseKind::crab;
  const bool crab_second = kind == PulseKind::crab && frame == Frame::lab;
  const double t_rect = 1e3 / (4.0 * opts.omega_rect);
  RectPulse rect_first{t_rect, opts.omega_rect, nu, 0.0};

  std::vector<double> deltas = ensemble_detunings(noise);
  const long m = static_cast<long>(deltas.size());

  // First pulse depends only on the ensemble member.
  std::vector<Eigen::Vector2cd> psi1(m);
  parallel_for(m, workers, [&](long i) {
    double omega_m = sys.omega_L + deltas[i];
    Eigen::Vector2cd v(1.0, 0.0);
    psi1[i] = crab_first ? apply_crab(v, half, omega_m, opts.dt_prop)
                         : apply_rect(v, rect_first, omega_m, opts.dt_prop);
  });

  const long K = static_cast<long>(tau_grid.size());
  std::vector<double> mean_p0(K);
  parallel_for(K, workers, [&](long j) {
    double tau = tau_grid[j];
    double phi2;
    switch (frame) {
      case Frame::lab: phi2 = 0.0; break;
      case Frame::rotating: phi2 = phase_rad(nu, tau); break;
      default: phi2 = phase_rad(sys.omega_L, tau); break;  // following
    }
    double acc = 0;
    for (long i = 0; i < m; ++i) {
      double omega_m = sys.omega_L + deltas[i];
      Eigen::Vector2cd v = free_evolve(psi1[i], tau, omega_m);
      if (crab_second) {
        v = apply_crab(v, half, omega_m, opts.dt_prop);
      } else {
        RectPulse second{t_rect, opts.omega_rect, nu, phi2};
        v = apply_rect(v, second, omega_m, opts.dt_prop);
      }
      acc += p0_of(v);
    }
    mean_p0[j] = acc / static_cast<double>(m);
  });

  Trace tr;
  tr.times = tau_grid;
  tr.signal.resize(K);
  tr.frame = frame;
  tr.delta_omega = delta_omega;
  std::mt19937_64 rng(opts.seed);
  for (long j = 0; j < K; ++j) tr.signal[j] = readout_prob(mean_p0[j], noise, rng);
  add_meta(tr, "experiment", "fid");
  add_meta(tr, "pulse_kind", to_string(kind));
  add_meta(tr, "omega_L_MHz", num(sys.omega_L));
  add_meta(tr, "carrier_MHz", num(nu));
  if (!crab_first) add_meta(tr, "omega_rect_MHz", num(opts.omega_rect));
  add_meta(tr, "ensemble_size", std::to_string(m));
  return tr;
}

Trace hahn_echo(PulseKind kind, Frame frame, double tau0,
                const std::vector<double>& tau_grid, const SpinSystem& sys,
                const NoiseModel& noise, const EchoOptions& opts, int workers) {
  require_qubit_sys(sys, "hahn_echo");
  check_tau_grid(tau_grid);
  noise.validate();
  if (!(tau0 > 0)) throw domain_error("hahn_echo: tau0 must be > 0");
  const double nu = sys.omega_L;  // one carrier clock for all pulses

  CrabParams half = opts.crab_half ? *opts.crab_half : default_half_pulse(sys);
  CrabParams pi = opts.crab_pi ? *opts.crab_pi : default_pi_pulse(sys);
  const bool crab = kind == PulseKind::crab;
  const bool crab_all = crab && frame == Frame::lab;
  const double t_half = crab ? half.T : 1e3 / (4.0 * opts.omega_rect);
  const double t_pi_rect = 1e3 / (2.0 * opts.omega_rect);
  const double t_pi = crab_all ? pi.T : t_pi_rect;
  const double t_final = crab_all ? half.T : 1e3 / (4.0 * opts.omega_rect);

  // Carrier phase accumulated up to a pulse's start (lab frame pins it to 0).
  auto carrier_phase = [&](double t_start) {
    return frame == Frame::lab ? 0.0 : phase_rad(nu, t_start);
  };

  std::vector<double> deltas = ensemble_detunings(noise);
  const long m = static_cast<long>(deltas.size());

  // Everything up to the end of the pi pulse is tau-independent.
  const double t2 = t_half + tau0;
  std::vector<Eigen::Vector2cd> psi_mid(m);
  parallel_for(m, workers, [&](long i) {
    double omega_m = sys.omega_L + deltas[i];
    Eigen::Vector2cd v(1.0, 0.0);
    v = crab ? apply_crab(v, half, omega_m, opts.dt_prop)
             : apply_rect(v, RectPulse{t_half, opts.omega_rect, nu, carrier_phase(0.0)},
                          omega_m, opts.dt_prop);
    v = free_evolve(v, tau0, omega_m);
    v = crab_all ? apply_crab(v, pi, omega_m, opts.dt_prop)
                 : apply_rect(v, RectPulse{t_pi_rect, opts.omega_rect, nu, carrier_phase(t2)},
                              omega_m, opts.dt_prop);
    psi_mid[i] = v;
  });

  const long K = static_cast<long>(tau_grid.size());
  std::vector<double> mean_p0(K);
  parallel_for(K, workers, [&](long j) {
    double tau = tau_grid[j];
    double t3 = t_half + tau0 + t_pi + tau;
    double acc = 0;
    for (long i = 0; i < m; ++i) {
      double omega_m = sys.omega_L + deltas[i];
      Eigen::Vector2cd v = free_evolve(psi_mid[i], tau, omega_m);
      if (crab_all)
        v = apply_crab(v, half, omega_m, opts.dt_prop);
      else
        v = apply_rect(v, RectPulse{t_final, opts.omega_rect, nu, carrier_phase(t3)},
                       omega_m, opts.dt_prop);
      acc += p0_of(v);
    }
    mean_p0[j] = acc / static_cast<double>(m);
  });

  Trace tr;
  tr.times = tau_grid;
  tr.signal.resize(K);
  tr.frame = frame;
  tr.delta_omega = 0.0;
  std::mt19937_64 rng(opts.seed);
  for (long j = 0; j < K; ++j) tr.signal[j] = readout_prob(mean_p0[j], noise, rng);
  add_meta(tr, "experiment", "hahn_echo");
  add_meta(tr, "pulse_kind", to_string(kind));
  add_meta(tr, "omega_L_MHz", num(sys.omega_L));
  add_meta(tr, "tau0_ns", num(tau0));
  add_meta(tr, "detuning_sigma_MHz", num(noise.detuning_sigma));
  add_meta(tr, "ensemble_size", std::to_string(m));
  return tr;
}

Spectrum fourier_spectrum(const Trace& trace) {
  const long n = static_cast<long>(trace.times.size());
  if (n < 16) throw non_uniform_grid("fourier_spectrum: need >= 16 samples");
  const double dt = trace.times[1] - trace.times[0];
  for (long k = 1; k < n; ++k)
    if (std::abs(trace.times[k] - trace.times[k - 1] - dt) > 1e-9 * std::max(1.0, dt))
      throw non_uniform_grid("fourier_spectrum: non-uniform time grid");

  double mean = 0;
  for (double s : trace.signal) mean += s;
  mean /= n;
  std::vector<double> y(n);
  double wsum = 0;
  for (long k = 0; k < n; ++k) {
    double w = 0.5 * (1.0 - std::cos(two_pi * k / (n - 1)));  // Hann taper
    y[k] = (trace.signal[k] - mean) * w;
    wsum += w;
  }

  Spectrum sp;
  const long bins = n / 2 + 1;
  sp.freq_mhz.resize(bins);
  sp.magnitude.resize(bins);
  for (long j = 0; j < bins; ++j) {
    std::complex<double> acc = 0;
    std::complex<double> z = 1.0;
    std::complex<double> rot = std::polar(1.0, -two_pi * j / n);
    for (long k = 0; k < n; ++k) {
      acc += y[k] * z;
      z *= rot;
    }
    sp.freq_mhz[j] = 1e3 * j / (n * dt);
    sp.magnitude[j] = 2.0 * std::abs(acc) / wsum;
  }
  return sp;
}

double spectrum_peak_mhz(const Spectrum& s) {
  if (s.magnitude.size() < 2) throw domain_error("spectrum_peak_mhz: empty spectrum");
  size_t best = 1;
  for (size_t j = 2; j < s.magnitude.size(); ++j)
    if (s.magnitude[j] > s.magnitude[best]) best = j;
  return s.freq_mhz[best];
}

namespace {

struct LinearFit {
  double c_cos = 0, c_sin = 0, y0 = 0, sse = 0;
};

LinearFit fit_at_frequency(const std::vector<double>& t,
                           const std::vector<double>& y, double f_mhz) {
  const long n = static_cast<long>(t.size());
  Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
  Eigen::Vector3d aty = Eigen::Vector3d::Zero();
  for (long k = 0; k < n; ++k) {
    double th = phase_rad(f_mhz, t[k]);
    Eigen::Vector3d row(std::cos(th), std::sin(th), 1.0);
    ata += row * row.transpose();
    aty += row * y[k];
  }
  Eigen::Vector3d sol = ata.ldlt().solve(aty);
  LinearFit fit;
  fit.c_cos = sol(0);
  fit.c_sin = sol(1);
  fit.y0 = sol(2);
  for (long k = 0; k < n; ++k) {
    double th = phase_rad(f_mhz, t[k]);
    double r = y[k] - (sol(0) * std::cos(th) + sol(1) * std::sin(th) + sol(2));
    fit.sse += r * r;
  }
  return fit;
}

}  // namespace

SinusoidFit fit_sinusoid(const std::vector<double>& times,
                         const std::vector<double>& signal) {
  const long n = static_cast<long>(times.size());
  if (n < 8 || signal.size() != times.size())
    throw fit_failure("fit_sinusoid: need >= 8 samples");

  double mean = 0;
  for (double s : signal) mean += s;
  mean /= n;
  double sst = 0, dev = 0;
  for (double s : signal) {
    sst += (s - mean) * (s - mean);
    dev = std::max(dev, std::abs(s - mean));
  }
  SinusoidFit out;
  if (dev < 1e-11) {  // constant trace: A ~ 0, f unconstrained
    out.y0 = mean;
    return out;
  }

  double f0, bin;
  if (n >= 16) {
    Trace tmp;
    tmp.times = times;
    tmp.signal = signal;
    Spectrum sp = fourier_spectrum(tmp);
    f0 = spectrum_peak_mhz(sp);
    bin = sp.freq_mhz[1] - sp.freq_mhz[0];
  } else {
    // Too short for a useful spectrum: coarse scan up to Nyquist.
    double dtmin = times[1] - times[0];
    for (long k = 1; k < n; ++k) dtmin = std::min(dtmin, times[k] - times[k - 1]);
    if (!(dtmin > 0)) throw fit_failure("fit_sinusoid: times not increasing");
    double f_nyq = 1e3 / (2.0 * dtmin);
    bin = f_nyq / 64.0;
    f0 = bin;
    double best = fit_at_frequency(times, signal, f0).sse;
    for (int j = 2; j < 64; ++j) {
      double sse = fit_at_frequency(times, signal, j * bin).sse;
      if (sse < best) {
        best = sse;
        f0 = j * bin;
      }
    }
  }

  // The 3-parameter subproblem is linear; search the remaining 1-D frequency
  // axis around the spectral peak by golden section.
  double lo = std::max(f0 - bin, 0.25 * bin), hi = f0 + bin;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = fit_at_frequency(times, signal, x1).sse;
  double f2 = fit_at_frequency(times, signal, x2).sse;
  for (int it = 0; it < 80 && hi - lo > 1e-10 * std::max(1.0, f0); ++it) {
    if (f1 < f2) {
      hi = x2; x2 = x1; f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = fit_at_frequency(times, signal, x1).sse;
    } else {
      lo = x1; x1 = x2; f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = fit_at_frequency(times, signal, x2).sse;
    }
  }
  double fbest = 0.5 * (lo + hi);
  LinearFit fit = fit_at_frequency(times, signal, fbest);

  // c_cos cos(th) + c_sin sin(th) = A cos(th + phi0)
  out.A = std::hypot(fit.c_cos, fit.c_sin);
  out.phi0 = std::atan2(-fit.c_sin, fit.c_cos);
  out.f_mhz = fbest;
  out.y0 = fit.y0;
  out.residual = sst > 0 ? std::sqrt(fit.sse / sst) : 0.0;
  if (out.residual > 0.2)
    throw fit_failure("fit_sinusoid: relative residual " + num(out.residual) +
                      " exceeds 0.2");
  return out;
}

SinusoidFit fit_sinusoid(const Trace& trace) {
  return fit_sinusoid(trace.times, trace.signal);
}

TomographyResult tomography(const Preparation& prep, const SpinSystem& sys,
                            const NoiseModel& noise, std::uint64_t seed,
                            const TomographyOptions& opts) {
  require_qubit_sys(sys, "tomography");
  noise.validate();
  if (!(opts.omega_tomo > 0) || opts.n_samples < 16)
    throw domain_error("tomography: bad options");

  // Prepare.
  Eigen::Vector2cd psi;
  double t0 = prep.t_evol;
  if (prep.state) {
    if (prep.state->dim() != 2)
      throw dimension_mismatch("tomography: prepared state must be 2-level");
    psi = Eigen::Vector2cd(prep.state->a(0), prep.state->a(1));
  } else if (prep.crab_pulse) {
    psi = apply_crab({1.0, 0.0}, *prep.crab_pulse, sys.omega_L, opts.dt_prop);
    t0 += prep.crab_pulse->T;
  } else {
    psi = Eigen::Vector2cd(1.0, 0.0);
  }
  psi = free_evolve(psi, prep.t_evol, sys.omega_L);

  // Resonant Rabi traces about two orthogonal rotating-frame axes. The drive
  // carrier is referenced to the global clock (t=0), which anchors the
  // reconstructed frame; offset 0 drives about +x, offset -pi/2 about +y.
  const double duration = opts.n_periods / opts.omega_tomo * 1e3;
  const double dt_sample = duration / (opts.n_samples - 1);
  long stride = std::max<long>(1, static_cast<long>(std::ceil(dt_sample / opts.dt_prop - 1e-12)));
  double dt_eff = dt_sample / stride;
  std::mt19937_64 rng(seed);

  auto run_trace = [&](double axis_offset) {
    double local_phase = phase_rad(sys.omega_L, t0) + axis_offset;
    ControlFn drive = [&](double u) {
      return opts.omega_tomo * std::cos(phase_rad(sys.omega_L, u) + local_phase);
    };
    PropagateOptions popts;
    popts.trajectory_stride = stride;
    SpinSystem s2 = sys;
    Eigen::VectorXcd a(2);
    a << psi(0), psi(1);
    PropagationResult res =
        propagate(QuantumState(std::move(a)), drive, duration, s2, dt_eff, popts);
    Trace tr;
    tr.times.reserve(res.trajectory.size());
    tr.signal.reserve(res.trajectory.size());
    for (auto& [t, st] : res.trajectory) {
      tr.times.push_back(t);
      tr.signal.push_back(readout_prob(std::norm(st.a(0)), noise, rng));
    }
    add_meta(tr, "experiment", "tomography_rabi");
    add_meta(tr, "omega_tomo_MHz", num(opts.omega_tomo));
    return tr;
  };

  Trace rabi_x = run_trace(0.0);
  Trace rabi_y = run_trace(-two_pi / 4.0);

  SinusoidFit fx = fit_sinusoid(rabi_x);
  SinusoidFit fy = fit_sinusoid(rabi_y);

  // z from the normalization points (no drive yet at the first sample).
  double z = rabi_x.signal[0] + rabi_y.signal[0] - 1.0;

  // Each trace measures one transverse component as the in-phase quadrature
  // 2A sin(phi0) of its Rabi oscillation. This linear estimate stays well
  // conditioned when the component is near zero, where the alternative
  // sqrt((2A)^2 - z^2) would amplify fit error.
  auto component = [](const SinusoidFit& fit) {
    return 2.0 * fit.A * std::sin(fit.phi0);
  };

  double y = component(fx);  // drive about x measures y
  double x = component(fy);  // drive about y measures x

  // Shrink into the Bloch ball (noise can push the raw estimate outside).
  double r = std::sqrt(x * x + y * y + z * z);
  if (r > 1.0) {
    x /= r;
    y /= r;
    z /= r;
  }

  BlochVector bloch{x, y, z};
  TomographyResult out{density_from_bloch(bloch), bloch,
                       std::move(rabi_x),         std::move(rabi_y),
                       fy.A,                      fx.A,
                       z};
  return out;
}

}  // namespace qcrab
