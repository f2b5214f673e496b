#include "qcrab/propagator.hpp"

#include <cmath>

namespace qcrab {

namespace {

// One midpoint step for the qubit block H = [[0, G], [G, w]]:
// U = exp(-i phi H) with phi = 2 pi dt 1e-3, evaluated via the closed-form
// rotation identity for H = (w/2) I + G sx - (w/2) sz.
inline void step_two_level(complexd& c0, complexd& c1, double G, double w,
                           double phi) {
  const double m = 0.5 * w;
  const double r = std::hypot(m, G);
  const double cs = std::cos(phi * r);
  const double sn = r > 0 ? std::sin(phi * r) / r : phi;
  const complexd e = std::polar(1.0, -phi * m);
  const complexd i(0.0, 1.0);
  const complexd n0 = e * (cs * c0 - i * sn * (-m * c0 + G * c1));
  const complexd n1 = e * (cs * c1 - i * sn * (G * c0 + m * c1));
  c0 = n0;
  c1 = n1;
}

Eigen::Matrix3d hamiltonian_three_level(double G, const SpinSystem& sys) {
  Eigen::Matrix3d h;
  h << 0, G, G,
       G, sys.omega_L, 0,
       G, 0, 2.0 * sys.D - sys.omega_L;
  return h;
}

inline void step_three_level(Eigen::Vector3cd& psi, double G,
                             const SpinSystem& sys, double phi) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(hamiltonian_three_level(G, sys));
  const Eigen::Matrix3d& v = es.eigenvectors();
  Eigen::Vector3cd y = v.transpose() * psi;
  for (int k = 0; k < 3; ++k) y(k) *= std::polar(1.0, -phi * es.eigenvalues()(k));
  psi = v * y;
}

struct StepGrid {
  long n = 0;
  double dt_eff = 0;
};

// Uniform steps tiling [0, T] exactly with dt_eff <= dt.
StepGrid make_grid(double T, double dt) {
  if (!(dt > 0)) throw bad_step("propagate: dt must be > 0");
  StepGrid g;
  g.n = std::max<long>(1, static_cast<long>(std::ceil(T / dt - 1e-12)));
  g.dt_eff = T / g.n;
  return g;
}

QuantumState to_state(const Eigen::Vector2cd& v) {
  Eigen::VectorXcd a(2);
  a << v(0), v(1);
  return QuantumState(std::move(a));
}

QuantumState to_state(const Eigen::Vector3cd& v) {
  Eigen::VectorXcd a(3);
  a << v(0), v(1), v(2);
  return QuantumState(std::move(a));
}

PropagationResult run_steps(const QuantumState& psi0,
                            std::span<const double> amps, double T,
                            const SpinSystem& sys, double dt_eff,
                            const PropagateOptions& opts) {
  const long n = static_cast<long>(amps.size());
  const double phi = two_pi * dt_eff * 1e-3;
  PropagationResult res{psi0, {}, n};
  auto record = [&](double t, const QuantumState& s) {
    res.trajectory.emplace_back(t, s);
  };
  if (sys.levels == 2) {
    Eigen::Vector2cd v(psi0.a(0), psi0.a(1));
    if (opts.trajectory_stride > 0) record(0.0, to_state(v));
    for (long k = 0; k < n; ++k) {
      step_two_level(v(0), v(1), amps[k], sys.omega_L, phi);
      if (opts.trajectory_stride > 0 &&
          ((k + 1) % opts.trajectory_stride == 0 || k + 1 == n))
        record(k + 1 == n ? T : (k + 1) * dt_eff, to_state(v));
    }
    res.psi_final = to_state(v);
  } else {
    Eigen::Vector3cd v(psi0.a(0), psi0.a(1), psi0.a(2));
    if (opts.trajectory_stride > 0) record(0.0, to_state(v));
    for (long k = 0; k < n; ++k) {
      step_three_level(v, amps[k], sys, phi);
      if (opts.trajectory_stride > 0 &&
          ((k + 1) % opts.trajectory_stride == 0 || k + 1 == n))
        record(k + 1 == n ? T : (k + 1) * dt_eff, to_state(v));
    }
    res.psi_final = to_state(v);
  }
  return res;
}

using AmpFiller = std::function<void(long n, double dt_eff, std::vector<double>&)>;

PropagationResult propagate_generic(const QuantumState& psi0, double T,
                                    const SpinSystem& sys, double dt,
                                    const PropagateOptions& opts,
                                    const AmpFiller& fill) {
  sys.validate();
  if (psi0.dim() != sys.levels)
    throw dimension_mismatch("propagate: state dimension != sys.levels");
  StepGrid g = make_grid(T, dt);
  std::vector<double> amps;
  fill(g.n, g.dt_eff, amps);
  PropagationResult res = run_steps(psi0, amps, T, sys, g.dt_eff, opts);
  if (opts.convergence_check) {
    std::vector<double> amps2;
    fill(2 * g.n, g.dt_eff / 2.0, amps2);
    PropagateOptions plain;
    PropagationResult fine = run_steps(psi0, amps2, T, sys, g.dt_eff / 2.0, plain);
    double ov = std::norm(res.psi_final.a.dot(fine.psi_final.a));
    if (std::abs(ov - 1.0) > 1e-8)
      throw step_too_large("propagate: dt-halving overlap deviates by " +
                           std::to_string(std::abs(ov - 1.0)));
  }
  return res;
}

}  // namespace

void SpinSystem::validate() const {
  if (!(omega_L > 0)) throw domain_error("SpinSystem: omega_L must be > 0");
  if (levels != 2 && levels != 3) throw domain_error("SpinSystem: levels must be 2 or 3");
}

Eigen::MatrixXcd hamiltonian_at(double t_ns, const ControlFn& gamma,
                                const SpinSystem& sys) {
  sys.validate();
  double G = gamma(t_ns);
  if (sys.levels == 2) {
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(2, 2);
    h(0, 1) = G;
    h(1, 0) = G;
    h(1, 1) = sys.omega_L;
    return h;
  }
  return hamiltonian_three_level(G, sys).cast<complexd>();
}

PropagationResult propagate(const QuantumState& psi0, const CrabParams& pulse,
                            const SpinSystem& sys, double dt_ns,
                            const PropagateOptions& opts) {
  pulse.validate();
  return propagate_generic(psi0, pulse.T, sys, dt_ns, opts,
                           [&](long n, double dte, std::vector<double>& amps) {
                             midpoint_amplitudes(pulse, n, dte, amps);
                           });
}

PropagationResult propagate(const QuantumState& psi0, const PulseWaveform& w,
                            const SpinSystem& sys, double dt_ns,
                            const PropagateOptions& opts) {
  if (w.samples.size() < 2 || !(w.dt > 0))
    throw domain_error("propagate: invalid waveform");
  auto interp = [&](double t) {
    double x = t / w.dt;
    long i = static_cast<long>(x);
    if (i < 0) return w.samples.front();
    if (i + 1 >= static_cast<long>(w.samples.size())) return w.samples.back();
    double frac = x - i;
    return w.samples[i] * (1.0 - frac) + w.samples[i + 1] * frac;
  };
  return propagate_generic(psi0, w.T, sys, dt_ns, opts,
                           [&](long n, double dte, std::vector<double>& amps) {
                             amps.resize(n);
                             for (long k = 0; k < n; ++k)
                               amps[k] = interp((k + 0.5) * dte);
                           });
}

PropagationResult propagate(const QuantumState& psi0, const ControlFn& gamma,
                            double T_ns, const SpinSystem& sys, double dt_ns,
                            const PropagateOptions& opts) {
  if (!(T_ns > 0)) throw domain_error("propagate: T must be > 0");
  return propagate_generic(psi0, T_ns, sys, dt_ns, opts,
                           [&](long n, double dte, std::vector<double>& amps) {
                             amps.resize(n);
                             for (long k = 0; k < n; ++k)
                               amps[k] = gamma((k + 0.5) * dte);
                           });
}

QuantumState propagate_free(const QuantumState& psi, double tau_ns,
                            const SpinSystem& sys) {
  sys.validate();
  if (tau_ns < 0) throw domain_error("propagate_free: tau must be >= 0");
  Eigen::VectorXcd a = psi.a;
  a(1) *= std::polar(1.0, -phase_rad(sys.omega_L, tau_ns));
  if (psi.dim() == 3)
    a(2) *= std::polar(1.0, -phase_rad(2.0 * sys.D - sys.omega_L, tau_ns));
  return QuantumState(std::move(a));
}

double two_vs_three_level_check(const CrabParams& pulse,
                                const QuantumState& target,
                                const SpinSystem& sys, double dt_ns) {
  if (target.dim() != 2)
    throw dimension_mismatch("two_vs_three_level_check: target must be 2-level");
  SpinSystem s2 = sys;
  s2.levels = 2;
  SpinSystem s3 = sys;
  s3.levels = 3;
  double f2 = overlap_probability(target,
                                  propagate(ket0(2), pulse, s2, dt_ns).psi_final);
  Eigen::VectorXcd t3 = Eigen::VectorXcd::Zero(3);
  t3(0) = target.a(0);
  t3(1) = target.a(1);
  double f3 = overlap_probability(QuantumState(std::move(t3)),
                                  propagate(ket0(3), pulse, s3, dt_ns).psi_final);
  return std::abs(f2 - f3);
}

Eigen::Vector2cd propagate_two_level_raw(Eigen::Vector2cd psi,
                                         std::span<const double> mid_amps,
                                         double omega_mhz, double dt_ns) {
  const double phi = two_pi * dt_ns * 1e-3;
  for (double g : mid_amps) step_two_level(psi(0), psi(1), g, omega_mhz, phi);
  return psi;
}

Eigen::Matrix2cd pulse_unitary_two_level(std::span<const double> mid_amps,
                                         double omega_mhz, double dt_ns) {
  Eigen::Matrix2cd u = Eigen::Matrix2cd::Identity();
  const double phi = two_pi * dt_ns * 1e-3;
  for (double g : mid_amps) {
    step_two_level(u(0, 0), u(1, 0), g, omega_mhz, phi);
    step_two_level(u(0, 1), u(1, 1), g, omega_mhz, phi);
  }
  return u;
}

Eigen::Vector3cd propagate_three_level_raw(Eigen::Vector3cd psi,
                                           std::span<const double> mid_amps,
                                           const SpinSystem& sys,
                                           double dt_ns) {
  const double phi = two_pi * dt_ns * 1e-3;
  for (double g : mid_amps) step_three_level(psi, g, sys, phi);
  return psi;
}

}  // namespace qcrab
