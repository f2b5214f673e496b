#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "qcrab/optimizer.hpp"

namespace qcrab {

// The three reference frames differ only in the carrier-phase bookkeeping of
// pulses applied after a free-evolution interval; the propagation itself is
// always the lab-frame Schrodinger equation.
enum class Frame { lab, rotating, following };
enum class PulseKind { crab, rectangular };

const char* to_string(Frame f);
const char* to_string(PulseKind k);

struct NoiseModel {
  double photons_per_shot = 0;  // 0 = noiseless readout
  long shots = 1;
  double detuning_sigma = 0;    // MHz, quasi-static Gaussian spread; 0 = none
  int ensemble_size = 1;
  // Readout contrast: photon rate per shot is photons_per_shot*(c0 p0 + c1 (1-p0)).
  double c0 = 1.0;
  double c1 = 0.7;

  bool noiseless() const { return photons_per_shot <= 0; }
  void validate() const;
};

struct Trace {
  std::vector<double> times;    // ns, strictly increasing
  std::vector<double> signal;   // population of |0> (normalized fluorescence)
  Frame frame = Frame::lab;
  double delta_omega = 0;       // MHz
  std::vector<std::pair<std::string, std::string>> metadata;
};

struct Spectrum {
  std::vector<double> freq_mhz;
  std::vector<double> magnitude;
};

struct SinusoidFit {
  double A = 0;        // amplitude, >= 0
  double f_mhz = 0;
  double phi0 = 0;     // radians
  double y0 = 0;       // offset
  double residual = 0; // relative rms residual
};

struct TomographyResult {
  DensityMatrix rho;
  BlochVector bloch;
  Trace rabi_x, rabi_y;   // drives about the two orthogonal frame axes
  double amp_x = 0;       // fitted amplitude of the trace that measures x
  double amp_y = 0;
  double z = 0;
};

// State preparation for tomography: either an exact state, or a CRAB pulse
// applied to |0>, optionally followed by free evolution for t_evol ns.
struct Preparation {
  std::optional<QuantumState> state;
  std::optional<CrabParams> crab_pulse;
  double t_evol = 0;
};

struct TomographyOptions {
  double omega_tomo = 8.0;   // MHz, low-power Rabi drive amplitude
  double n_periods = 2.0;    // Rabi periods per trace
  int n_samples = 251;       // points per trace
  double dt_prop = 0.005;    // ns
};

struct FidOptions {
  double omega_rect = 8.0;              // MHz, rectangular pi/2 amplitude
  std::optional<CrabParams> crab_half;  // pi/2 pulse for PulseKind::crab;
                                        // defaults to the bundled reference
                                        // pulse rescaled to sys.omega_L
  double dt_prop = 0.01;                // ns
  std::uint64_t seed = 0;
};

struct EchoOptions {
  double omega_rect = 8.0;
  std::optional<CrabParams> crab_half;
  std::optional<CrabParams> crab_pi;
  double dt_prop = 0.01;
  std::uint64_t seed = 0;
};

// Noiseless: |<0|psi>|^2. Noisy: Poisson photon counting over `shots` shots
// at rate photons_per_shot*(c0 p0 + c1(1-p0)), rescaled back to a population
// estimate (clamped below at 0).
double readout(const QuantumState& psi, const NoiseModel& noise,
               std::mt19937_64& rng);

// Resonant lab-frame drive Gamma(t) = Omega_d cos(2 pi omega_L t): population
// of |0> as a function of pulse length, sampled every dt_sample up to t_max.
Trace rabi_sweep(double omega_d, double omega_L, double t_max,
                 double dt_sample, const NoiseModel& noise = {},
                 std::uint64_t seed = 0, double dt_prop = 0.01);

// Full tomography protocol: prepare, drive resonant Rabi rotations about two
// orthogonal rotating-frame axes, fit both traces, reconstruct (x, y, z).
// z comes from the undriven first samples; each transverse component is the
// in-phase quadrature 2A sin(phi0) of the corresponding fitted oscillation.
TomographyResult tomography(const Preparation& prep, const SpinSystem& sys,
                            const NoiseModel& noise = {}, std::uint64_t seed = 0,
                            const TomographyOptions& opts = {});

// pi/2 -- tau -- pi/2 free induction decay. The second pulse's carrier phase
// offset per frame: lab fixed, rotating 2 pi (omega_L + delta_omega) tau,
// following 2 pi omega_L tau (cancels the Larmor rotation). Drive carrier at
// omega_L + delta_omega. With detuning_sigma > 0 the trace is averaged over
// the stratified Gaussian detuning ensemble.
Trace fid(PulseKind kind, Frame frame, double delta_omega,
          const std::vector<double>& tau_grid, const SpinSystem& sys,
          const NoiseModel& noise = {}, const FidOptions& opts = {},
          int workers = 0);

// pi/2 -- tau0 -- pi -- tau -- pi/2 Hahn echo; same frame bookkeeping, with
// pulses sharing one carrier clock (rotating frame: each pulse's phase is the
// carrier phase accumulated up to its start).
Trace hahn_echo(PulseKind kind, Frame frame, double tau0,
                const std::vector<double>& tau_grid, const SpinSystem& sys,
                const NoiseModel& noise = {}, const EchoOptions& opts = {},
                int workers = 0);

// Mean-subtracted, Hann-tapered DFT magnitude spectrum. Requires a uniform
// grid of >= 16 samples (throws non_uniform_grid).
Spectrum fourier_spectrum(const Trace& trace);

// Peak frequency of the spectrum, ignoring the DC bin.
double spectrum_peak_mhz(const Spectrum& s);

// Least-squares fit of A cos(2 pi f t + phi0) + y0 (f in MHz, t in ns);
// initial f from the spectrum argmax, then local refinement. A >= 0 (the
// phase absorbs the sign). A constant trace fits with A < 1e-9 and
// unconstrained f. Throws fit_failure if the relative residual exceeds 0.2.
SinusoidFit fit_sinusoid(const Trace& trace);
SinusoidFit fit_sinusoid(const std::vector<double>& times,
                         const std::vector<double>& signal);

// sigma * PhiInv((i+0.5)/m), i = 0..m-1: deterministic stratified samples of
// a centered Gaussian; used for the quasi-static detuning ensemble.
std::vector<double> stratified_gaussian(double sigma, int m);
double inverse_normal_cdf(double p);

// Poisson sample via exponential arrival counting (portable determinism).
long poisson_sample(double lambda, std::mt19937_64& rng);

// {t0, t0+step, ...} up to and including t1 (within half a step).
std::vector<double> uniform_grid(double t0, double t1, double step);

}  // namespace qcrab
