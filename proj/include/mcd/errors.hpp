#pragma once

#include <stdexcept>
#include <string>

namespace mcd {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A point outside the declared domain of a system.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed request: bad sizes, non-symmetric matrices, undecayed potentials.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Integration produced non-finite values.
class OverflowError : public Error {
 public:
  OverflowError(const std::string& what, double x) : Error(what), x_(x) {}
  double where() const { return x_; }

 private:
  double x_;
};

/// Energy too close to a channel threshold for asymptotic matching.
class ThresholdError : public Error {
 public:
  using Error::Error;
};

/// A transform whose normalisation matrix (or seed) degenerates somewhere on the grid.
class SingularTransformError : public Error {
 public:
  SingularTransformError(const std::string& what, double x) : Error(what), x_(x) {}
  double where() const { return x_; }

 private:
  double x_;
};

/// A construction that ran but violated its own contract (e.g. non-normalizable result).
class ConstructionError : public Error {
 public:
  using Error::Error;
};

}  // namespace mcd
