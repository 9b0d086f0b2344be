#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace spine {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Input violates a documented precondition (non-finite entries, non-PSD cost, ...).
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

/// A linear system that must be nonsingular is not.
class SingularSystemError : public Error {
 public:
  using Error::Error;
};

/// Two endpoints of a cable coincide, so its direction is undefined.
class DegenerateGeometryError : public Error {
 public:
  DegenerateGeometryError(const std::string& what, std::size_t cable)
      : Error(what), cable_(cable) {}
  std::size_t cable() const noexcept { return cable_; }

 private:
  std::size_t cable_;
};

/// Euler-angle rates are undefined (pitch at +-pi/2).
class KinematicSingularityError : public Error {
 public:
  using Error::Error;
};

/// An optimization problem along a trajectory has no feasible point.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, std::size_t index)
      : Error(what), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// Required cable tension exceeds what a non-negative rest length can deliver.
class NegativeRestLengthError : public Error {
 public:
  NegativeRestLengthError(const std::string& what, std::size_t cable)
      : Error(what), cable_(cable) {}
  std::size_t cable() const noexcept { return cable_; }

 private:
  std::size_t cable_;
};

/// Simulation produced NaN or Inf.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t step)
      : Error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// Malformed configuration or model file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace spine
