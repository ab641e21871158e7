#pragma once

#include <stdexcept>
#include <string>

namespace plap {

/// Argument outside the region where a formula or operation is defined.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Quadrature, extrapolation or fit did not reach the requested accuracy.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, double achieved = 0.0)
      : std::runtime_error(what), achieved_(achieved) {}
  double achieved() const noexcept { return achieved_; }

 private:
  double achieved_;
};

class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Newton iteration failed; the message carries the residual trace.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flux sign convention violated (R_0 <= 0 with the current particle labels).
class SignError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every point of a sweep failed; the message lists the per-delta errors.
class SweepError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace plap
