#ifndef FACSENS_ERRORS_HPP
#define FACSENS_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace facsens {

// Base class for every error thrown by this library.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// A symmetric matrix required to be positive definite is not (up to the
// documented relative eigenvalue tolerance).
struct NotPositiveDefinite : Error {
  using Error::Error;
};

// Operands have incompatible shapes for the requested operation.
struct DimensionMismatch : Error {
  using Error::Error;
};

// An iterative fit ran out of iterations before reaching its tolerance.
struct NonConvergence : Error {
  using Error::Error;
};

// A quadratic form that must be positive for the requested quantity is
// numerically zero (e.g. a direction with no variance, or an outcome
// carrying no confounding signal).
struct DegenerateDirection : Error {
  using Error::Error;
};

// A negative-control outcome carries no confounding signal, so the
// refinement it would provide is undefined.
struct DegenerateNC : Error {
  using Error::Error;
};

// Observed negative-control effects are not compatible with the factor
// structure (Penrose condition violated beyond tolerance).
struct IncompatibleNC : Error {
  using Error::Error;
};

// The negative-control Gram matrix is numerically singular, so the
// multi-control interval cannot be formed.
struct SingularKbb : Error {
  using Error::Error;
};

// More negative-control outcomes than the analytic interval supports
// (the closed form requires J < m).
struct JTooLarge : Error {
  using Error::Error;
};

// A feasibility sweep found no admissible point.
struct EmptyRegion : Error {
  using Error::Error;
};

// A method name that this build does not provide.
struct UnsupportedMethod : Error {
  using Error::Error;
};

// A configuration file could not be parsed or fails validation.
struct ConfigParseError : Error {
  using Error::Error;
};

// A file could not be read or written.
struct IoError : Error {
  using Error::Error;
};

}  // namespace facsens

#endif  // FACSENS_ERRORS_HPP
