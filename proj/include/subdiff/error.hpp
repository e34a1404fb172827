#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace subdiff {

/// Base of every error the library throws. The CLI maps subclasses onto exit
/// codes, so each failure category gets its own type.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the mathematical domain of the operation.
class DomainError : public Error {
public:
  using Error::Error;
};

/// Two series/fields were built on different grids.
class GridMismatchError : public Error {
public:
  using Error::Error;
};

/// Requested more sine modes than the space grid can resolve.
class AliasingError : public Error {
public:
  using Error::Error;
};

/// A storage cap was exceeded.
class ResourceError : public Error {
public:
  using Error::Error;
};

/// Problem data violates a precondition the solver cannot work around.
class AdmissibilityError : public Error {
public:
  using Error::Error;
};

/// An iterative method stopped before reaching its tolerance.
class ConvergenceError : public Error {
public:
  ConvergenceError(const std::string& what, std::size_t iterations = 0,
                   double last_update = 0.0, double ratio = 0.0)
      : Error(what), iterations_(iterations), last_update_(last_update),
        ratio_(ratio) {}

  std::size_t iterations() const noexcept { return iterations_; }
  double last_update() const noexcept { return last_update_; }
  double ratio() const noexcept { return ratio_; }

private:
  std::size_t iterations_;
  double last_update_;
  double ratio_;
};

/// Elimination hit a vanishing pivot.
class SingularSystemError : public Error {
public:
  SingularSystemError(const std::string& what, std::size_t step)
      : Error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

private:
  std::size_t step_;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

} // namespace subdiff
