#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mcsv {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PreconditionViolated : public Error {
 public:
  using Error::Error;
};

class NoConvergence : public Error {
 public:
  NoConvergence(std::string what, int iterations, double residual)
      : Error(std::move(what)), iterations_(iterations), residual_(residual) {}
  int iterations() const { return iterations_; }
  double residual() const { return residual_; }

 private:
  int iterations_;
  double residual_;
};

/// The coupling q does not dominate the coefficient c = f'(e^u*) e^u*.
class QTooSmall : public PreconditionViolated {
 public:
  QTooSmall(std::string what, double q, double c_max)
      : PreconditionViolated(std::move(what)), q_(q), c_max_(c_max) {}
  double q() const { return q_; }
  double c_max() const { return c_max_; }

 private:
  double q_;
  double c_max_;
};

class BoundsViolation : public Error {
 public:
  BoundsViolation(std::string what, double excess)
      : Error(std::move(what)), excess_(excess) {}
  double excess() const { return excess_; }

 private:
  double excess_;
};

class SigmaTooSmall : public PreconditionViolated {
 public:
  using PreconditionViolated::PreconditionViolated;
};

class NegativeArgument : public PreconditionViolated {
 public:
  NegativeArgument(std::string what, std::size_t index = 0)
      : PreconditionViolated(std::move(what)), index_(index) {}
  /// Offending grid index for field evaluation (0 for scalar calls).
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

class OutOfRange : public PreconditionViolated {
 public:
  using PreconditionViolated::PreconditionViolated;
};

class GridMismatch : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class SnapshotError : public Error {
 public:
  using Error::Error;
};

}  // namespace mcsv
