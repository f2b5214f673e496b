#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "qcrab/propagator.hpp"

namespace qcrab {

struct OptimizationConfig {
  double omega_L = 30.0;          // MHz
  double g0 = 30.0;               // MHz
  double T = 0;                   // ns
  int p = 2;                      // even boundary exponent
  QuantumState target = ket_minus1();
  std::vector<double> c_f_set{0.35};
  std::vector<int> N_set{5};
  int S = 1;                      // starts per (c_f, N) combination
  double omega_min = 10.0;        // MHz, frequency window
  double omega_max = 100.0;       // MHz
  double kappa_f = 1e9;           // max acceptable figure of merit
  double kappa_gamma = 1e9;       // max acceptable amplitude, MHz
  std::uint64_t seed = 0;
  double dt = 0.001;              // ns, propagation step
  bool freeze_frequencies = false;
  long max_evals = 20000;         // per-start budget
  double tol_f = 1e-8;
  double tol_x = 1e-6;

  void validate() const;
};

struct OptimizationResult {
  CrabParams params;
  double merit = 0;
  double fidelity_f = 0;          // squared overlap with the target
  double max_amp = 0;             // MHz
  long evaluations = 0;
  int start_index = 0;
  bool converged = false;
};

// Thrown when no start satisfies both kappa filters; carries the best
// candidate by merit so callers can still report it.
struct no_feasible_result : error {
  OptimizationResult best_infeasible;
  explicit no_feasible_result(OptimizationResult best);
};

struct MultiStartResult {
  std::vector<OptimizationResult> starts;  // indexed by start_index
  int best_feasible_index = -1;            // -1 if none feasible
  int best_any_index = -1;
};

// (1 - f) + c_f * max|Gamma|/g0, with f the squared overlap after propagating
// |0> under the pulse in the 2-level model at cfg.dt. The amplitude penalty is
// normalized by g0 so the merit is dimensionless.
double figure_of_merit(const CrabParams& params, const OptimizationConfig& cfg);

// Same evaluation, returning the pieces.
struct MeritBreakdown {
  double merit = 0, fidelity_f = 0, max_amp = 0;
};
MeritBreakdown evaluate_merit(const CrabParams& params,
                              const OptimizationConfig& cfg);

struct NmOptions {
  double tol_f = 1e-8;
  double tol_x = 1e-6;
  long max_evals = 20000;
  double alpha = 1.0;   // reflection
  double gamma = 2.0;   // expansion
  double rho = 0.5;     // contraction
  double sigma = 0.5;   // shrink
};

struct NmResult {
  std::vector<double> x;
  double f = 0;
  long evaluations = 0;
  bool converged = false;
};

// Standard Nelder-Mead. Initial simplex: x0 plus per-coordinate perturbation
// of 5% of |x0_i| (0.00025 where x0_i = 0). Terminates when the simplex
// f-spread < tol_f and the max vertex distance from the best < tol_x, or at
// max_evals. Throws non_finite_objective if the objective returns non-finite.
NmResult nelder_mead(const std::function<double(const std::vector<double>&)>& objective,
                     const std::vector<double>& x0, const NmOptions& opts = {});

// Random CRAB start: a_n, b_n uniform in [-1,1]; omega_n uniform in the
// window (MHz), sorted, redrawn until pairwise separation >= 1 MHz. Only N,
// a, b, omega are filled in. Throws window_too_narrow if the window cannot
// hold N frequencies at that separation.
CrabParams random_init(int N, double omega_min_mhz, double omega_max_mhz,
                       std::mt19937_64& rng);

// S x |c_f_set| x |N_set| independent Nelder-Mead searches over the packed
// (a, b, omega) vector (omega fixed per start when freeze_frequencies).
// Deterministic for a given cfg + seed, independent of worker count.
MultiStartResult optimize_multi_start(const OptimizationConfig& cfg,
                                      int workers = 0);

// The filtered minimum-merit result; throws no_feasible_result if none pass.
const OptimizationResult& best_result(const MultiStartResult& r);

}  // namespace qcrab
