#pragma once

#include <stdexcept>
#include <string>

namespace rowstoch {

/// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// The directed graph is not strongly connected.
struct NotStronglyConnected final : Error {
  using Error::Error;
};

/// An agent or matrix index is out of range.
struct BadIndex final : Error {
  using Error::Error;
};

/// An iterative routine failed to reach its tolerance within its cap.
struct NoConvergence final : Error {
  using Error::Error;
};

/// No power of the deviation matrix fell below 1 in operator norm.
struct SpectralRadiusNotLessThanOne final : Error {
  using Error::Error;
};

/// A matrix required to be symmetric positive definite is not.
struct NotPositiveDefinite final : Error {
  using Error::Error;
};

/// Dimensions of an argument do not match the instance.
struct ShapeMismatch final : Error {
  using Error::Error;
};

/// A diagonal scaling matrix has an entry too close to zero to invert.
struct SingularDiagonal final : Error {
  using Error::Error;
};

/// The step size is outside the range the operation requires.
struct StepSizeOutOfRange final : Error {
  using Error::Error;
};

/// A certification check on derived constants did not hold.
struct CertificationFailed final : Error {
  using Error::Error;
};

/// Not enough usable records to perform the requested fit.
struct InsufficientData final : Error {
  using Error::Error;
};

/// A trace file or stream does not conform to the trace format.
struct MalformedTrace final : Error {
  using Error::Error;
};

}  // namespace rowstoch
