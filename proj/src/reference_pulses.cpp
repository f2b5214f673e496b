#include "qcrab/reference_pulses.hpp"

namespace qcrab {

CrabParams reference_pi() {
  CrabParams p;
  p.N = 5;
  p.a = {-5.4865, 2.4803, -0.5404, 1.5659, 1.4673};
  p.b = {0.2812, 1.8823, 5.8533, -2.2123, 3.6469};
  p.omega = {0.0201, 0.0415, 0.0513, 0.0687, 0.0892};  // GHz
  p.T = 15.4071;
  p.p = 60;
  p.g0 = 30.0;
  p.c_f = 0.35;
  return p;
}

CrabParams reference_pi_half() {
  CrabParams p;
  p.N = 5;
  p.a = {2.1123, -5.5973, -9.7577, 26.3464, -10.4212};
  p.b = {9.6205, -28.7365, -3.9425, 5.4267, 7.2445};
  p.omega = {0.0149, 0.0401, 0.0464, 0.0664, 0.0909};  // GHz
  p.T = 7.7036;
  p.p = 38;
  p.g0 = 30.0;
  p.c_f = 0.23;
  return p;
}

QuantumState reference_pi_target() { return ket_minus1(); }

QuantumState reference_pi_half_target() { return ket_equator(0.0); }

}  // namespace qcrab
