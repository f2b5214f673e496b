#pragma once

#include <stdexcept>
#include <string>

namespace qcrab {

// Base class for every error thrown by this library, so callers can catch
// qcrab::error at the boundary and map it to an exit code.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct dimension_mismatch : error { using error::error; };
struct leakage_error : error { using error::error; };
struct domain_error : error { using error::error; };
struct bad_step : error { using error::error; };
struct step_too_large : error { using error::error; };
struct non_finite_objective : error { using error::error; };
struct window_too_narrow : error { using error::error; };
struct fit_failure : error { using error::error; };
struct non_uniform_grid : error { using error::error; };
struct config_error : error { using error::error; };

}  // namespace qcrab
