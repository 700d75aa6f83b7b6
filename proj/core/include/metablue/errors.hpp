#pragma once

#include <stdexcept>

namespace metablue {

/// Invalid or inconsistent configuration (bad parameter files, violated
/// parameter inequalities). CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A detector could not find what it was looking for (no preamble, no
/// correlation peak above floor).
struct NotFoundError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A decoded frame failed its integrity check.
struct CorruptFrameError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Ranging could not be performed (missing EM or acoustic detection).
struct RangingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Nonlinear solver diverged or the problem is rank deficient.
struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// File could not be read/written or has an unexpected layout.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace metablue
