#pragma once

// Exception types shared across the toolkit. All errors derive from
// sivspec::Error so callers can catch toolkit failures in one place.

#include <stdexcept>
#include <string>

namespace sivspec {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Non-finite or out-of-domain argument.
class InvalidInput : public Error {
  public:
    using Error::Error;
};

/// Line profile with both widths zero (or otherwise undefined shape).
class DegenerateProfile : public Error {
  public:
    using Error::Error;
};

/// Measured width falls below the instrument response by more than the
/// clamp tolerance; `deficit_nm` is how far below.
class BelowResolution : public Error {
  public:
    BelowResolution(const std::string& what, double deficit_nm)
        : Error(what), deficit_nm(deficit_nm) {}
    double deficit_nm;
};

/// Four-line pattern that cannot be read as two doublets.
class AmbiguousPattern : public Error {
  public:
    using Error::Error;
};

/// Rank-deficient design matrix in a linear fit.
class DegenerateDesign : public Error {
  public:
    using Error::Error;
};

/// Relaxation eigenvalues degenerate (or complex); the bi-exponential
/// correlation form does not apply.
class DegenerateDynamics : public Error {
  public:
    using Error::Error;
};

/// Model evaluated outside its stated validity range.
class ValidityError : public Error {
  public:
    using Error::Error;
};

/// Input file could not be parsed; carries 1-based location when known.
class ParseError : public Error {
  public:
    ParseError(const std::string& what, std::size_t line = 0, std::size_t column = 0)
        : Error(what), line(line), column(column) {}
    std::size_t line;
    std::size_t column;
};

/// Invalid or inconsistent run configuration.
class ConfigError : public Error {
  public:
    using Error::Error;
};

/// Numerical failure with no meaningful result to return.
class NumericalError : public Error {
  public:
    using Error::Error;
};

/// Requested computation would exceed a configured resource cap.
class CapacityError : public Error {
  public:
    using Error::Error;
};

}  // namespace sivspec
