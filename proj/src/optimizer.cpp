#include "qcrab/optimizer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <thread>

namespace qcrab {

namespace {

// Uniform double in [0,1) from the top 53 bits; pinned here rather than using
// std::uniform_real_distribution so streams are identical across toolchains.
double u01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * u01(rng);
}

// Reflect x into [lo, hi] (triangle-wave fold): keeps the objective continuous
// for out-of-window frequency proposals.
double fold_into(double x, double lo, double hi) {
  double w = hi - lo;
  double y = std::fmod(x - lo, 2.0 * w);
  if (y < 0) y += 2.0 * w;
  return y <= w ? lo + y : hi - (y - w);
}

struct PackLayout {
  int N = 0;
  bool with_freqs = true;
  int dim() const { return with_freqs ? 3 * N : 2 * N; }
};

std::vector<double> pack(const CrabParams& p, const PackLayout& lay) {
  std::vector<double> x;
  x.reserve(lay.dim());
  x.insert(x.end(), p.a.begin(), p.a.end());
  x.insert(x.end(), p.b.begin(), p.b.end());
  if (lay.with_freqs) x.insert(x.end(), p.omega.begin(), p.omega.end());
  return x;
}

void unpack(const std::vector<double>& x, const PackLayout& lay,
            double lo_ghz, double hi_ghz, CrabParams& p) {
  const int N = lay.N;
  p.a.assign(x.begin(), x.begin() + N);
  p.b.assign(x.begin() + N, x.begin() + 2 * N);
  if (lay.with_freqs)
    for (int n = 0; n < N; ++n)
      p.omega[n] = fold_into(x[2 * N + n], lo_ghz, hi_ghz);
}

}  // namespace

void OptimizationConfig::validate() const {
  if (!(omega_L > 0) || !(g0 > 0)) throw domain_error("config: frequencies must be > 0");
  if (!(T > 0)) throw domain_error("config: T must be > 0");
  if (p < 2 || p % 2 != 0) throw domain_error("config: p must be even and >= 2");
  if (target.dim() != 2) throw domain_error("config: target must be 2-level");
  if (c_f_set.empty() || N_set.empty()) throw domain_error("config: empty c_f_set or N_set");
  for (double c : c_f_set)
    if (c < 0) throw domain_error("config: c_f must be >= 0");
  for (int n : N_set)
    if (n < 1) throw domain_error("config: N must be >= 1");
  if (S < 1) throw domain_error("config: S must be >= 1");
  if (!(omega_min > 0) || !(omega_min < omega_max))
    throw domain_error("config: need 0 < omega_min < omega_max");
  if (!(kappa_gamma > 0)) throw domain_error("config: kappa_gamma must be > 0");
  if (!(dt > 0)) throw domain_error("config: dt must be > 0");
  if (max_evals < 1) throw domain_error("config: max_evals must be >= 1");
}

MeritBreakdown evaluate_merit(const CrabParams& params,
                              const OptimizationConfig& cfg) {
  long n = std::max<long>(1, static_cast<long>(std::ceil(params.T / cfg.dt - 1e-12)));
  double dt_eff = params.T / n;
  thread_local std::vector<double> amps;
  midpoint_amplitudes(params, n, dt_eff, amps);
  double max_amp = 0;
  for (double g : amps) max_amp = std::max(max_amp, std::abs(g));
  Eigen::Vector2cd psi =
      propagate_two_level_raw({1.0, 0.0}, amps, cfg.omega_L, dt_eff);
  Eigen::Vector2cd t(cfg.target.a(0), cfg.target.a(1));
  MeritBreakdown out;
  out.fidelity_f = std::norm(t.dot(psi));
  out.max_amp = max_amp;
  out.merit = (1.0 - out.fidelity_f) + params.c_f * (max_amp / params.g0);
  return out;
}

double figure_of_merit(const CrabParams& params, const OptimizationConfig& cfg) {
  params.validate();
  cfg.validate();
  return evaluate_merit(params, cfg).merit;
}

NmResult nelder_mead(const std::function<double(const std::vector<double>&)>& objective,
                     const std::vector<double>& x0, const NmOptions& opts) {
  const int n = static_cast<int>(x0.size());
  if (n < 1) throw domain_error("nelder_mead: empty start vector");
  long evals = 0;
  auto eval = [&](const std::vector<double>& x) {
    double f = objective(x);
    ++evals;
    if (!std::isfinite(f)) throw non_finite_objective("objective returned non-finite value");
    return f;
  };

  std::vector<std::vector<double>> xs(n + 1, x0);
  std::vector<double> fs(n + 1);
  for (int i = 1; i <= n; ++i) {
    double step = 0.05 * std::abs(x0[i - 1]);
    xs[i][i - 1] += step > 0 ? step : 0.00025;
  }
  for (int i = 0; i <= n; ++i) fs[i] = eval(xs[i]);

  std::vector<int> order(n + 1);
  bool converged = false;
  while (true) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int i, int j) { return fs[i] < fs[j]; });
    const int best = order[0], worst = order[n], second = order[n - 1];

    double spread = fs[worst] - fs[best];
    double dist = 0;
    for (int i = 0; i <= n; ++i) {
      if (i == best) continue;
      double d2 = 0;
      for (int k = 0; k < n; ++k) {
        double d = xs[i][k] - xs[best][k];
        d2 += d * d;
      }
      dist = std::max(dist, std::sqrt(d2));
    }
    if (spread < opts.tol_f && dist < opts.tol_x) {
      converged = true;
      break;
    }
    if (evals >= opts.max_evals) break;

    std::vector<double> centroid(n, 0.0);
    for (int i = 0; i <= n; ++i) {
      if (i == worst) continue;
      for (int k = 0; k < n; ++k) centroid[k] += xs[i][k];
    }
    for (double& c : centroid) c /= n;

    auto along = [&](double coef) {
      std::vector<double> x(n);
      for (int k = 0; k < n; ++k)
        x[k] = centroid[k] + coef * (centroid[k] - xs[worst][k]);
      return x;
    };

    std::vector<double> xr = along(opts.alpha);
    double fr = eval(xr);
    if (fr < fs[best]) {
      std::vector<double> xe = along(opts.alpha * opts.gamma);
      double fe = eval(xe);
      if (fe < fr) {
        xs[worst] = std::move(xe);
        fs[worst] = fe;
      } else {
        xs[worst] = std::move(xr);
        fs[worst] = fr;
      }
    } else if (fr < fs[second]) {
      xs[worst] = std::move(xr);
      fs[worst] = fr;
    } else {
      bool outside = fr < fs[worst];
      std::vector<double> xc = along(outside ? opts.alpha * opts.rho : -opts.rho);
      double fc = eval(xc);
      if (fc < (outside ? fr : fs[worst])) {
        xs[worst] = std::move(xc);
        fs[worst] = fc;
      } else {
        for (int i = 1; i <= n; ++i) {
          int v = order[i];
          for (int k = 0; k < n; ++k)
            xs[v][k] = xs[best][k] + opts.sigma * (xs[v][k] - xs[best][k]);
          fs[v] = eval(xs[v]);
        }
      }
    }
  }

  int best = static_cast<int>(std::min_element(fs.begin(), fs.end()) - fs.begin());
  return NmResult{xs[best], fs[best], evals, converged};
}

CrabParams random_init(int N, double omega_min_mhz, double omega_max_mhz,
                       std::mt19937_64& rng) {
  if (N < 1) throw domain_error("random_init: N must be >= 1");
  const double sep = 1.0;  // MHz
  if (!(omega_max_mhz - omega_min_mhz > (N - 1) * sep))
    throw window_too_narrow("random_init: window cannot hold " +
                            std::to_string(N) + " frequencies 1 MHz apart");
  CrabParams p;
  p.N = N;
  p.a.resize(N);
  p.b.resize(N);
  p.omega.resize(N);
  for (int n = 0; n < N; ++n) p.a[n] = uniform(rng, -1.0, 1.0);
  for (int n = 0; n < N; ++n) p.b[n] = uniform(rng, -1.0, 1.0);
  std::vector<double> w(N);
  for (long attempt = 0;; ++attempt) {
    if (attempt >= 100000)
      throw window_too_narrow("random_init: separation unachievable after 100000 draws");
    for (int n = 0; n < N; ++n) {
      do {
        w[n] = uniform(rng, omega_min_mhz, omega_max_mhz);
      } while (w[n] <= omega_min_mhz || w[n] >= omega_max_mhz);
    }
    std::sort(w.begin(), w.end());
    bool ok = true;
    for (int n = 1; n < N; ++n)
      if (w[n] - w[n - 1] < sep) ok = false;
    if (ok) break;
  }
  for (int n = 0; n < N; ++n) p.omega[n] = w[n] * 1e-3;  // store GHz
  return p;
}

no_feasible_result::no_feasible_result(OptimizationResult best)
    : error("no start satisfied the feasibility filters (merit <= kappa_f, "
            "max amplitude <= kappa_gamma)"),
      best_infeasible(std::move(best)) {}

MultiStartResult optimize_multi_start(const OptimizationConfig& cfg, int workers) {
  cfg.validate();
  struct StartSpec {
    int N;
    double c_f;
  };
  std::vector<StartSpec> specs;
  for (int N : cfg.N_set)
    for (double c_f : cfg.c_f_set)
      for (int s = 0; s < cfg.S; ++s) specs.push_back({N, c_f});
  const long n_starts = static_cast<long>(specs.size());

  MultiStartResult out;
  out.starts.resize(n_starts);

  auto run_start = [&](long idx) {
    std::mt19937_64 rng(cfg.seed ^ static_cast<std::uint64_t>(idx));
    CrabParams params = random_init(specs[idx].N, cfg.omega_min, cfg.omega_max, rng);
    params.T = cfg.T;
    params.p = cfg.p;
    params.g0 = cfg.g0;
    params.c_f = specs[idx].c_f;

    PackLayout lay{params.N, !cfg.freeze_frequencies};
    const double lo = cfg.omega_min * 1e-3, hi = cfg.omega_max * 1e-3;
    CrabParams trial = params;
    auto objective = [&](const std::vector<double>& x) {
      unpack(x, lay, lo, hi, trial);
      return evaluate_merit(trial, cfg).merit;
    };
    NmOptions nm{cfg.tol_f, cfg.tol_x, cfg.max_evals};
    NmResult r = nelder_mead(objective, pack(params, lay), nm);

    unpack(r.x, lay, lo, hi, params);
    MeritBreakdown mb = evaluate_merit(params, cfg);
    out.starts[idx] = OptimizationResult{std::move(params), mb.merit,
                                         mb.fidelity_f,    mb.max_amp,
                                         r.evaluations,    static_cast<int>(idx),
                                         r.converged};
  };

  long hw = static_cast<long>(std::thread::hardware_concurrency());
  long k = workers > 0 ? workers : std::max<long>(1, hw);
  k = std::min(k, n_starts);
  if (k <= 1) {
    for (long i = 0; i < n_starts; ++i) run_start(i);
  } else {
    std::atomic<long> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr first_error;
    std::mutex err_mu;
    for (long t = 0; t < k; ++t)
      pool.emplace_back([&] {
        for (long i = next.fetch_add(1); i < n_starts; i = next.fetch_add(1)) {
          try {
            run_start(i);
          } catch (...) {
            std::lock_guard<std::mutex> g(err_mu);
            if (!first_error) first_error = std::current_exception();
          }
        }
      });
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  for (long i = 0; i < n_starts; ++i) {
    const OptimizationResult& r = out.starts[i];
    if (out.best_any_index < 0 || r.merit < out.starts[out.best_any_index].merit)
      out.best_any_index = static_cast<int>(i);
    bool feasible = r.merit <= cfg.kappa_f && r.max_amp <= cfg.kappa_gamma;
    if (feasible && (out.best_feasible_index < 0 ||
                     r.merit < out.starts[out.best_feasible_index].merit))
      out.best_feasible_index = static_cast<int>(i);
  }
  return out;
}

const OptimizationResult& best_result(const MultiStartResult& r) {
  if (r.best_feasible_index < 0) {
    if (r.best_any_index < 0)
      throw no_feasible_result(OptimizationResult{});
    throw no_feasible_result(r.starts[r.best_any_index]);
  }
  return r.starts[r.best_feasible_index];
}

}  // namespace qcrab
