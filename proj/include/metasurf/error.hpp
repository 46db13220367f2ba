#pragma once

#include <stdexcept>
#include <string>

namespace metasurf {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or degenerate geometry (zero area, bad radii, overlapping atoms).
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain of a special function.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Kernel or field evaluated at its source point.
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// Linear-algebra or convergence failure inside a numerical routine.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Oracle comparison exceeded its tolerance.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration file. `line()` is 1-based, 0 when not tied to a line.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

}  // namespace metasurf
