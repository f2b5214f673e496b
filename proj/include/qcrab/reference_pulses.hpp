#pragma once

#include "qcrab/pulse.hpp"
#include "qcrab/quantum.hpp"

namespace qcrab {

// Bundled reference parameter sets for the two built-in targets, tuned for
// omega_L = g0 = 30 MHz with a (10,100) MHz basis window. Use scaled_params
// to re-time them for other transition frequencies.

// Population inversion |0> -> |-1>, T = 15.4071 ns.
CrabParams reference_pi();

// |0> -> (|0> + |-1>)/sqrt(2), T = 7.7036 ns.
CrabParams reference_pi_half();

// The target states the reference pulses were optimized for.
QuantumState reference_pi_target();
QuantumState reference_pi_half_target();

}  // namespace qcrab
