#pragma once

// Uniform periodic grid on the flat torus [0, L)^2 with Fourier-spectral
// differential operators, trapezoidal quadrature and a preconditioned
// Krylov solver for the stiff Helmholtz problem
//
//     -Δu + q^2 (1 + c/q) u = q^2 rhs.
//
// Fields are plain values: every operation returns a new field and never
// mutates its arguments.

#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace mcsv {

struct GridSpec {
  int n = 64;           ///< points per axis, even and >= 8
  double length = 1.0;  ///< side of the square torus

  double spacing() const { return length / n; }
  double area() const { return length * length; }
  std::size_t size() const { return static_cast<std::size_t>(n) * n; }
  double coord(int i) const { return i * spacing(); }

  /// Throws PreconditionViolated unless n is even, n >= 8 and length > 0.
  void validate() const;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Real samples on a GridSpec, stored row-major: index i*n + j holds the
/// value at (x_i, y_j).
class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(const GridSpec& grid, double value = 0.0);
  ScalarField(const GridSpec& grid, std::vector<double> values);

  template <class F>
  static ScalarField from_function(const GridSpec& grid, F&& fn) {
    ScalarField out(grid);
    for (int i = 0; i < grid.n; ++i)
      for (int j = 0; j < grid.n; ++j)
        out(i, j) = fn(grid.coord(i), grid.coord(j));
    return out;
  }

  const GridSpec& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  double& operator[](std::size_t k) { return values_[k]; }
  double operator[](std::size_t k) const { return values_[k]; }
  double& operator()(int i, int j) { return values_[index(i, j)]; }
  double operator()(int i, int j) const { return values_[index(i, j)]; }
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i) * grid_.n + j;
  }

  template <class F>
  ScalarField map(F&& fn) const {
    ScalarField out(grid_);
    for (std::size_t k = 0; k < values_.size(); ++k) out.values_[k] = fn(values_[k]);
    return out;
  }

  double min() const;
  double max() const;
  double max_abs() const;
  /// max - min
  double oscillation() const { return max() - min(); }
  bool all_finite() const;

  ScalarField& operator+=(const ScalarField& rhs);
  ScalarField& operator-=(const ScalarField& rhs);
  ScalarField& operator*=(const ScalarField& rhs);  ///< pointwise
  ScalarField& operator+=(double a);
  ScalarField& operator*=(double a);

  friend ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
  friend ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
  friend ScalarField operator*(ScalarField a, const ScalarField& b) { return a *= b; }
  friend ScalarField operator+(ScalarField a, double b) { return a += b; }
  friend ScalarField operator-(ScalarField a, double b) { return a += -b; }
  friend ScalarField operator*(ScalarField a, double b) { return a *= b; }
  friend ScalarField operator*(double b, ScalarField a) { return a *= b; }
  friend ScalarField operator+(double b, ScalarField a) { return a += b; }
  friend ScalarField operator-(double b, ScalarField a) { return (a *= -1.0) += b; }
  friend ScalarField operator-(ScalarField a) { return a *= -1.0; }

 private:
  void require_same_grid(const ScalarField& other) const;

  GridSpec grid_{};
  std::vector<double> values_;
};

ScalarField exp(const ScalarField& field);

/// Half-spectrum Fourier coefficients of a real field, normalised so that
/// field(x) = Σ_k c_k exp(i κ·x) with κ = 2πk/L. Row a stores the x wave
/// index, column b in [0, n/2] the y wave index.
class SpectralCoeffs {
 public:
  SpectralCoeffs() = default;
  explicit SpectralCoeffs(const GridSpec& grid);

  const GridSpec& grid() const { return grid_; }
  int rows() const { return grid_.n; }
  int cols() const { return grid_.n / 2 + 1; }

  std::complex<double>& operator()(int a, int b) { return c_[static_cast<std::size_t>(a) * cols() + b]; }
  std::complex<double> operator()(int a, int b) const {
    return c_[static_cast<std::size_t>(a) * cols() + b];
  }

  /// Signed integer wave number for row a, in [-n/2, n/2 - 1].
  int wave_x(int a) const { return a <= grid_.n / 2 - 1 ? a : a - grid_.n; }
  int wave_y(int b) const { return b; }
  /// Angular wave numbers 2πk/L.
  double kappa_x(int a) const;
  double kappa_y(int b) const;
  double kappa_squared(int a, int b) const;
  bool nyquist_x(int a) const { return a == grid_.n / 2; }
  bool nyquist_y(int b) const { return b == grid_.n / 2; }
  /// Multiplicity of column b when summing over the full spectrum.
  double column_weight(int b) const { return (b == 0 || b == grid_.n / 2) ? 1.0 : 2.0; }

 private:
  GridSpec grid_{};
  std::vector<std::complex<double>> c_;
};

SpectralCoeffs forward_transform(const ScalarField& field);
ScalarField inverse_transform(const SpectralCoeffs& coeffs);

/// Multiplies every Fourier mode by symbol(|κ|^2).
ScalarField apply_radial_symbol(const ScalarField& field,
                                const std::function<double(double)>& symbol);

double integrate(const ScalarField& field);
double mean(const ScalarField& field);
double inner(const ScalarField& a, const ScalarField& b);
double l2_norm(const ScalarField& field);
double sup_norm(const ScalarField& field);

ScalarField laplacian(const ScalarField& field);
/// Mean-zero solution of Δu = field (the mean of field is ignored).
ScalarField inverse_laplacian(const ScalarField& field);
/// Spectral first derivatives; the Nyquist mode of each derivative is zero.
std::pair<ScalarField, ScalarField> gradient(const ScalarField& field);
ScalarField grad_squared(const ScalarField& field);
/// ∇a·∇b
ScalarField grad_dot(const ScalarField& a, const ScalarField& b);

/// (Σ (1 + |κ|^2)^k |û_κ|^2 · area)^{1/2}; k = 0 is the L^2 norm.
double sobolev_norm(const ScalarField& field, int k);

struct HelmholtzOptions {
  double tol = 1e-10;
  int max_iterations = 0;  ///< 0 selects 10·n
};

struct HelmholtzReport {
  int iterations = 0;
  double residual = 0.0;  ///< ||-Δu + q^2(1 + c/q)u - q^2 rhs||_2
};

/// Solves -Δu + q^2 (1 + c/q) u = q^2 rhs by conjugate gradients
/// preconditioned with the exact inverse of -Δ + q^2. Requires q > ||c||_∞.
ScalarField helmholtz_solve(const ScalarField& c, const ScalarField& rhs, double q,
                            const HelmholtzOptions& options = {},
                            HelmholtzReport* report = nullptr);

/// Applies -Δu + q^2 (1 + c/q) u.
ScalarField helmholtz_apply(const ScalarField& c, const ScalarField& u, double q);

/// Periodic distance between two points of the torus.
double torus_distance(const GridSpec& grid, double x0, double y0, double x1, double y1);

}  // namespace mcsv
