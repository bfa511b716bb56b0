#pragma once

// The abstract nonlinearity f: smooth, strictly increasing on [0, T), with
// the constant s satisfying f(0) < s < sup f. Beyond the threshold T the
// derivative is blended to zero over [T, 2T] so that f, f' and f'' stay
// bounded and continuous.

#include <limits>
#include <string>
#include <tuple>
#include <vector>

#include "mcsv/torus_grid.hpp"

namespace mcsv {

struct FValues {
  double f = 0.0;
  double df = 0.0;
  double d2f = 0.0;
};

class NonlinearityModel {
 public:
  enum class Kind { U1, CP1, Custom };

  /// U(1) with s = 1.
  NonlinearityModel() = default;

  /// f(t) = t. The default threshold is T = 2 f^{-1}(s) = 2s.
  static NonlinearityModel u1(double s = 1.0, double threshold = 0.0);
  /// f(t) = (t - 1)/(t + 1), already bounded; T = +inf unless given.
  static NonlinearityModel cp1(double s, double threshold = std::numeric_limits<double>::infinity());
  /// Monotone cubic (Fritsch–Carlson) interpolation of (t, f) samples. The
  /// first sample must be at t = 0; T defaults to the last sample.
  static NonlinearityModel custom(std::vector<double> t, std::vector<double> f, double s,
                                  double threshold = 0.0);

  const std::string& name() const { return name_; }
  Kind kind() const { return kind_; }
  double s() const { return s_; }
  double threshold() const { return threshold_; }
  double f0() const { return raw(0.0).f; }
  /// Interpolation table of a Custom model (empty otherwise).
  const std::vector<double>& table_t() const { return t_; }
  const std::vector<double>& table_f() const { return f_; }
  /// sup of f over t >= 0 after truncation.
  double f_sup() const;

  FValues eval(double t) const;

  /// Same model with a different truncation threshold.
  NonlinearityModel with_threshold(double threshold) const;

 private:
  FValues raw(double t) const;
  void check_invariants() const;

  std::string name_ = "u1";
  Kind kind_ = Kind::U1;
  double s_ = 1.0;
  double threshold_ = 2.0;
  // Custom table and PCHIP slopes.
  std::vector<double> t_;
  std::vector<double> f_;
  std::vector<double> slope_;
};

/// (f, f', f'') at t >= 0. Throws NegativeArgument for t < 0.
FValues eval(const NonlinearityModel& model, double t);

struct FieldValues {
  ScalarField f;
  ScalarField df;
  ScalarField d2f;
};

/// Pointwise eval; NegativeArgument carries the offending grid index.
FieldValues eval_field(const NonlinearityModel& model, const ScalarField& t);

/// t with f(t) = y, for f(0) <= y < f(T). Throws OutOfRange otherwise.
double inverse(const NonlinearityModel& model, double y);

}  // namespace mcsv
