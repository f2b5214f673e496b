#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "qcrab/experiments.hpp"
#include "qcrab/reference_pulses.hpp"

using namespace qcrab;

namespace {

double ptp(const std::vector<double>& v) {
  auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *hi - *lo;
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

double stddev(const std::vector<double>& v) {
  double m = mean(v), s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / v.size());
}

QuantumState random_qubit(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Eigen::VectorXcd a(2);
  a << complexd(n(rng), n(rng)), complexd(n(rng), n(rng));
  return QuantumState::normalized(std::move(a));
}

}  // namespace

TEST_CASE("noise model validation") {
  NoiseModel ok;
  CHECK_NOTHROW(ok.validate());
  NoiseModel bad = ok;
  bad.photons_per_shot = -1;
  CHECK_THROWS_AS(bad.validate(), domain_error);
  bad = ok;
  bad.photons_per_shot = 0.02;
  bad.shots = 0;
  CHECK_THROWS_AS(bad.validate(), domain_error);
  bad = ok;
  bad.c1 = 1.5;
  CHECK_THROWS_AS(bad.validate(), domain_error);
  bad = ok;
  bad.ensemble_size = 0;
  CHECK_THROWS_AS(bad.validate(), domain_error);
}

TEST_CASE("poisson sampling") {
  std::mt19937_64 rng(1);
  CHECK(poisson_sample(0.0, rng) == 0);
  CHECK(poisson_sample(-3.0, rng) == 0);

  double acc = 0;
  for (int k = 0; k < 2000; ++k) acc += static_cast<double>(poisson_sample(10.0, rng));
  CHECK(acc / 2000 == doctest::Approx(10.0).epsilon(0.03));

  long big = poisson_sample(1e4, rng);
  CHECK(std::abs(static_cast<double>(big) - 1e4) < 400);  // 4 sigma
}

TEST_CASE("readout") {
  std::mt19937_64 rng(5);
  NoiseModel none;
  CHECK(readout(ket0(), none, rng) == 1.0);
  CHECK(readout(ket_minus1(), none, rng) == 0.0);
  CHECK(readout(ket_equator(0), none, rng) == doctest::Approx(0.5).epsilon(1e-14));

  NoiseModel noisy;
  noisy.photons_per_shot = 0.02;
  noisy.shots = 50000;

  // Deterministic for a fixed stream position.
  std::mt19937_64 ra(9), rb(9);
  CHECK(readout(ket0(), noisy, ra) == readout(ket0(), noisy, rb));

  // Unbiased around the true population, never negative.
  std::vector<double> ests;
  for (int k = 0; k < 300; ++k) ests.push_back(readout(ket0(), noisy, rng));
  CHECK(std::abs(mean(ests) - 1.0) < 0.03);
  CHECK(stddev(ests) > 0.05);
  CHECK(stddev(ests) < 0.2);
  for (int k = 0; k < 100; ++k) CHECK(readout(ket_minus1(), noisy, rng) >= 0.0);
}

TEST_CASE("shot noise scales as one over sqrt(shots)") {
  std::mt19937_64 rng(31);
  auto spread = [&](long shots) {
    NoiseModel nm;
    nm.photons_per_shot = 0.02;
    nm.shots = shots;
    std::vector<double> ests;
    for (int k = 0; k < 400; ++k) ests.push_back(readout(ket_equator(0), nm, rng));
    return stddev(ests);
  };
  double s1 = spread(1000), s2 = spread(4000), s3 = spread(16000);
  CHECK(s1 / s2 == doctest::Approx(2.0).epsilon(0.25));
  CHECK(s2 / s3 == doctest::Approx(2.0).epsilon(0.25));
}

TEST_CASE("stratified gaussian ensemble") {
  CHECK(inverse_normal_cdf(0.5) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(inverse_normal_cdf(0.975) == doctest::Approx(1.959963985).epsilon(1e-8));
  CHECK(inverse_normal_cdf(0.0013498980316300933) ==
        doctest::Approx(-3.0).epsilon(1e-8));
  CHECK_THROWS_AS(inverse_normal_cdf(0.0), domain_error);
  CHECK_THROWS_AS(inverse_normal_cdf(1.0), domain_error);

  std::vector<double> d = stratified_gaussian(2.0, 101);
  REQUIRE(d.size() == 101);
  CHECK(std::abs(mean(d)) < 1e-12);
  for (size_t i = 0; i < d.size(); ++i)
    CHECK(d[i] == doctest::Approx(-d[d.size() - 1 - i]).epsilon(1e-12));
  CHECK(std::is_sorted(d.begin(), d.end()));
  double sd = stddev(d);
  CHECK(sd > 0.92 * 2.0);
  CHECK(sd < 1.0 * 2.0);
}

TEST_CASE("uniform grid") {
  std::vector<double> g = uniform_grid(0.0, 400.0, 2.0);
  REQUIRE(g.size() == 201);
  CHECK(g.front() == 0.0);
  CHECK(g.back() == 400.0);
  CHECK(g[100] == 200.0);
  CHECK_THROWS_AS(uniform_grid(0.0, 1.0, 0.0), domain_error);
}

TEST_CASE("rabi sweep: zero drive is the identity") {
  Trace tr = rabi_sweep(0.0, 30.0, 100.0, 5.0);
  for (double s : tr.signal) CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rabi sweep: weak drive oscillates at the Rabi frequency") {
  // Sampling locked to the carrier period keeps the counter-rotating ripple
  // out of the fit.
  double dt_sample = 1e3 / 60.0;
  Trace tr = rabi_sweep(3.0, 30.0, 3000.0, dt_sample);
  SinusoidFit fit = fit_sinusoid(tr);
  CHECK(std::abs(1e3 / fit.f_mhz - 1e3 / 3.0) / (1e3 / 3.0) < 0.01);
  CHECK(fit.A == doctest::Approx(0.5).epsilon(0.02));
  CHECK(fit.residual < 1e-3);
  CHECK(1.0 - fit.residual * fit.residual > 0.999);
}

TEST_CASE("rabi sweep: strong drive fails to invert within one period") {
  // Over one extrapolated Rabi period the minimum stays well off zero; longer
  // windows eventually show quasi-periodic near-complete revivals.
  Trace tr = rabi_sweep(30.0, 30.0, 1e3 / 30.0, 0.25);
  double lo = *std::min_element(tr.signal.begin(), tr.signal.end());
  CHECK(lo > 0.02);
}

TEST_CASE("fourier spectrum") {
  Trace tone;
  tone.times = uniform_grid(0.0, 399.0, 1.0);
  for (double t : tone.times)
    tone.signal.push_back(0.3 + 0.2 * std::cos(phase_rad(5.0, t) + 0.7));
  Spectrum sp = fourier_spectrum(tone);
  CHECK(spectrum_peak_mhz(sp) == doctest::Approx(5.0).epsilon(0.05));
  // Hann-normalized magnitude recovers the tone amplitude near the peak.
  double peak_mag = *std::max_element(sp.magnitude.begin() + 1, sp.magnitude.end());
  CHECK(peak_mag == doctest::Approx(0.2).epsilon(0.05));

  Trace flat;
  flat.times = uniform_grid(0.0, 99.0, 1.0);
  flat.signal.assign(100, 0.42);
  Spectrum fsp = fourier_spectrum(flat);
  for (size_t j = 1; j < fsp.magnitude.size(); ++j) CHECK(fsp.magnitude[j] < 1e-12);

  Trace ragged = tone;
  ragged.times[7] += 0.3;
  CHECK_THROWS_AS(fourier_spectrum(ragged), non_uniform_grid);

  Trace tiny;
  tiny.times = uniform_grid(0.0, 9.0, 1.0);
  tiny.signal.assign(10, 0.0);
  CHECK_THROWS_AS(fourier_spectrum(tiny), non_uniform_grid);
}

TEST_CASE("sinusoid fitting") {
  std::vector<double> t = uniform_grid(0.0, 399.0, 1.0);
  std::vector<double> y;
  for (double ti : t) y.push_back(0.5 + 0.23 * std::cos(phase_rad(4.7, ti) + 1.1));
  SinusoidFit fit = fit_sinusoid(t, y);
  CHECK(fit.A == doctest::Approx(0.23).epsilon(1e-6));
  CHECK(fit.f_mhz == doctest::Approx(4.7).epsilon(1e-6));
  CHECK(fit.phi0 == doctest::Approx(1.1).epsilon(1e-5));
  CHECK(fit.y0 == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(fit.residual < 1e-6);

  std::vector<double> flat(100, 0.7);
  SinusoidFit cf = fit_sinusoid(uniform_grid(0.0, 99.0, 1.0), flat);
  CHECK(cf.A < 1e-9);
  CHECK(cf.y0 == doctest::Approx(0.7));

  // Structureless data must be rejected, not silently fitted.
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> junk;
  for (int k = 0; k < 200; ++k) junk.push_back(u(rng));
  CHECK_THROWS_AS(fit_sinusoid(uniform_grid(0.0, 199.0, 1.0), junk), fit_failure);

  CHECK_THROWS_AS(fit_sinusoid(std::vector<double>{1, 2, 3},
                               std::vector<double>{1, 2, 3}),
                  fit_failure);
}

TEST_CASE("tomography reconstructs known states") {
  // Deep rotating-wave regime: drive much slower than the carrier.
  SpinSystem sys{.D = 8000.0, .omega_L = 4000.0, .levels = 2, .B0 = 0};
  TomographyOptions opts;
  opts.omega_tomo = 4.0;

  auto check_state = [&](const QuantumState& psi, double tol) {
    Preparation prep;
    prep.state = psi;
    TomographyResult res = tomography(prep, sys, {}, 0, opts);
    DensityMatrix truth = density_from_state(psi);
    CHECK(trace_distance(res.rho, truth) < tol);
    // rho and bloch stay two views of the same reconstruction.
    BlochVector b = bloch_from_density(res.rho);
    CHECK(std::abs(b.x - res.bloch.x) < 1e-9);
    CHECK(std::abs(b.y - res.bloch.y) < 1e-9);
    CHECK(std::abs(b.z - res.bloch.z) < 1e-9);
  };

  check_state(ket0(), 1e-3);
  check_state(ket_minus1(), 1e-3);
  check_state(ket_equator(0), 1e-3);            // +x
  check_state(ket_equator(two_pi / 4), 1e-3);   // -y
  check_state(ket_equator(-two_pi / 4), 1e-3);  // +y
  check_state(ket_equator(two_pi / 2), 1e-3);   // -x

  std::mt19937_64 rng(12);
  for (int k = 0; k < 30; ++k) check_state(random_qubit(rng), 1e-3);
}

TEST_CASE("tomography after free evolution measures in the carrier frame") {
  // The tomography drive is phase-referenced to the global carrier clock, so
  // on-resonance free evolution is invisible: the reconstruction returns the
  // rotating-frame state, not the lab-frame Larmor-precessed one.
  SpinSystem sys{.D = 8000.0, .omega_L = 4000.0, .levels = 2, .B0 = 0};
  TomographyOptions opts;
  opts.omega_tomo = 4.0;
  Preparation prep;
  prep.state = ket_equator(0);
  prep.t_evol = 17.3;
  TomographyResult res = tomography(prep, sys, {}, 0, opts);
  CHECK(trace_distance(res.rho, density_from_state(ket_equator(0))) < 1e-3);
}

TEST_CASE("tomography of the reference pi pulse") {
  SpinSystem sys{.D = 2870.0, .omega_L = 30.0, .levels = 2, .B0 = 0};
  Preparation prep;
  prep.crab_pulse = reference_pi();
  TomographyOptions opts;
  opts.dt_prop = 0.002;
  TomographyResult res = tomography(prep, sys, {}, 0, opts);

  CHECK(res.rho.m(0, 0).real() == doctest::Approx(0.0).epsilon(0.01));
  CHECK(res.rho.m(1, 1).real() == doctest::Approx(1.0).epsilon(0.01));

  // Fidelity from tomography agrees with the direct state-vector number.
  QuantumState direct =
      propagate(ket0(2), reference_pi(), sys, 0.001).psi_final;
  double F_direct = fidelity(reference_pi_target(), density_from_state(direct));
  double F_tomo = fidelity(reference_pi_target(), res.rho);
  CHECK(std::abs(F_tomo - F_direct) < 0.003);
}

TEST_CASE("fid: rotating frame on resonance is flat") {
  SpinSystem sys{.D = 2870.0, .omega_L = 40.0, .levels = 2, .B0 = 0};
  FidOptions opts;
  opts.omega_rect = 0.05;  // deep rotating-wave regime
  opts.dt_prop = 0.05;
  Trace tr = fid(PulseKind::rectangular, Frame::rotating, 0.0,
                 uniform_grid(0.0, 500.0, 10.0), sys, {}, opts);
  CHECK(ptp(tr.signal) < 1e-3);
}

TEST_CASE("fid: frames coincide at full Larmor periods") {
  SpinSystem sys{.D = 2870.0, .omega_L = 40.0, .levels = 2, .B0 = 0};
  FidOptions opts;
  opts.omega_rect = 8.0;
  std::vector<double> taus{25.0, 50.0, 75.0};  // multiples of 1/omega_L
  Trace lab = fid(PulseKind::rectangular, Frame::lab, 0.0, taus, sys, {}, opts);
  Trace rot = fid(PulseKind::rectangular, Frame::rotating, 0.0, taus, sys, {}, opts);
  Trace fol = fid(PulseKind::rectangular, Frame::following, 0.0, taus, sys, {}, opts);
  for (size_t k = 0; k < taus.size(); ++k) {
    CHECK(lab.signal[k] == doctest::Approx(rot.signal[k]).epsilon(1e-9));
    CHECK(lab.signal[k] == doctest::Approx(fol.signal[k]).epsilon(1e-9));
  }
}

TEST_CASE("fid: lab frame interferogram oscillates at the Larmor frequency") {
  SpinSystem sys{.D = 2870.0, .omega_L = 30.0, .levels = 2, .B0 = 0};
  FidOptions opts;
  Trace tr = fid(PulseKind::crab, Frame::lab, 0.0, uniform_grid(0.0, 800.0, 0.25),
                 sys, {}, opts);
  Spectrum sp = fourier_spectrum(tr);
  double bin = sp.freq_mhz[1] - sp.freq_mhz[0];
  CHECK(std::abs(spectrum_peak_mhz(sp) - 30.0) <= bin);
}

TEST_CASE("fid: detuned drive beats at the detuning in the rotating frame") {
  SpinSystem sys{.D = 2870.0, .omega_L = 40.0, .levels = 2, .B0 = 0};
  FidOptions opts;
  opts.omega_rect = 8.0;
  Trace tr = fid(PulseKind::rectangular, Frame::rotating, 3.0,
                 uniform_grid(0.0, 1600.0, 1.0), sys, {}, opts);
  Spectrum sp = fourier_spectrum(tr);
  double bin = sp.freq_mhz[1] - sp.freq_mhz[0];
  CHECK(std::abs(spectrum_peak_mhz(sp) - 3.0) <= bin);
}

TEST_CASE("fid: gaussian detuning ensemble dephases the signal") {
  SpinSystem sys{.D = 2870.0, .omega_L = 40.0, .levels = 2, .B0 = 0};
  FidOptions opts;
  opts.omega_rect = 8.0;
  NoiseModel noise;
  noise.detuning_sigma = 2.0;
  noise.ensemble_size = 200;
  Trace tr = fid(PulseKind::rectangular, Frame::lab, 0.0,
                 uniform_grid(0.0, 500.0, 2.0), sys, noise, opts);
  // T2* = 1/(2 pi sigma): contrast is gone well before 500 ns.
  double early = 0, late = 0;
  for (size_t k = 0; k < tr.times.size(); ++k) {
    double dev = std::abs(tr.signal[k] - 0.5);
    if (tr.times[k] <= 40) early = std::max(early, dev);
    if (tr.times[k] >= 400) late = std::max(late, dev);
  }
  CHECK(early > 0.3);
  CHECK(late < 0.05);
}

TEST_CASE("hahn echo: no inhomogeneity, no decay") {
  SpinSystem sys{.D = 2870.0, .omega_L = 100.0, .levels = 2, .B0 = 0};
  EchoOptions opts;
  opts.dt_prop = 0.02;
  Trace tr = hahn_echo(PulseKind::rectangular, Frame::rotating, 200.0,
                       uniform_grid(100.0, 300.0, 10.0), sys, {}, opts);
  CHECK(ptp(tr.signal) < 0.01);
  CHECK(tr.signal[0] > 0.95);
}

TEST_CASE("hahn echo: refocusing peak and gaussian envelope") {
  SpinSystem sys{.D = 2870.0, .omega_L = 100.0, .levels = 2, .B0 = 0};
  EchoOptions opts;
  opts.dt_prop = 0.02;
  NoiseModel noise;
  noise.detuning_sigma = 2.0;
  noise.ensemble_size = 200;
  const double tau0 = 400.0;
  std::vector<double> taus = uniform_grid(200.0, 600.0, 10.0);
  Trace tr = hahn_echo(PulseKind::rectangular, Frame::rotating, tau0, taus, sys,
                       noise, opts);

  size_t imax = std::distance(
      tr.signal.begin(), std::max_element(tr.signal.begin(), tr.signal.end()));
  CHECK(std::abs(tr.times[imax] - tau0) <= 10.0);

  double sse = 0;
  for (size_t k = 0; k < taus.size(); ++k) {
    double env = (tr.signal[k] - 0.5) / 0.5;
    double arg = two_pi * noise.detuning_sigma * (taus[k] - tau0) * 1e-3;
    sse += std::pow(env - std::exp(-0.5 * arg * arg), 2);
  }
  CHECK(std::sqrt(sse / taus.size()) < 0.05);

  // Symmetric about the refocusing point.
  auto at = [&](double tau) {
    return tr.signal[static_cast<size_t>((tau - taus.front()) / 10.0)];
  };
  for (double d : {40.0, 80.0, 120.0})
    CHECK(std::abs(at(tau0 - d) - at(tau0 + d)) < 0.02);
}

TEST_CASE("hahn echo: crab pulses refocus too") {
  SpinSystem sys{.D = 2870.0, .omega_L = 30.0, .levels = 2, .B0 = 0};
  EchoOptions opts;
  NoiseModel noise;
  noise.detuning_sigma = 2.0;
  noise.ensemble_size = 150;
  const double tau0 = 300.0;
  std::vector<double> taus = uniform_grid(150.0, 450.0, 10.0);
  Trace tr = hahn_echo(PulseKind::crab, Frame::lab, tau0, taus, sys, noise, opts);
  size_t imax = std::distance(
      tr.signal.begin(), std::max_element(tr.signal.begin(), tr.signal.end()));
  CHECK(std::abs(tr.times[imax] - tau0) <= 10.0);
  for (double s : tr.signal) {
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
  }
}

TEST_CASE("experiment input validation") {
  SpinSystem sys3{.D = 2870.0, .omega_L = 30.0, .levels = 3, .B0 = 0};
  CHECK_THROWS_AS(fid(PulseKind::rectangular, Frame::lab, 0.0, {1.0}, sys3),
                  domain_error);
  SpinSystem sys{.D = 2870.0, .omega_L = 30.0, .levels = 2, .B0 = 0};
  CHECK_THROWS_AS(fid(PulseKind::rectangular, Frame::lab, 0.0, {}, sys),
                  domain_error);
  CHECK_THROWS_AS(fid(PulseKind::rectangular, Frame::lab, 0.0, {3.0, 2.0}, sys),
                  domain_error);
  CHECK_THROWS_AS(
      hahn_echo(PulseKind::rectangular, Frame::lab, 0.0, {1.0}, sys),
      domain_error);
  CHECK_THROWS_AS(rabi_sweep(-1.0, 30.0, 10.0, 1.0), domain_error);
}
