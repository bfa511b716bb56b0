#include "mcsv/torus_grid.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

#include "mcsv/errors.hpp"

namespace mcsv {

void GridSpec::validate() const {
  if (n < 8 || n % 2 != 0)
    throw PreconditionViolated("grid size must be even and >= 8, got " + std::to_string(n));
  if (!(length > 0.0) || !std::isfinite(length))
    throw PreconditionViolated("torus length must be positive");
}

// ---------------------------------------------------------------------------
// ScalarField

ScalarField::ScalarField(const GridSpec& grid, double value)
    : grid_(grid), values_(grid.size(), value) {}

ScalarField::ScalarField(const GridSpec& grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.size())
    throw GridMismatch("field has " + std::to_string(values_.size()) + " values, grid needs " +
                       std::to_string(grid_.size()));
}

void ScalarField::require_same_grid(const ScalarField& other) const {
  if (!(grid_ == other.grid_)) throw GridMismatch("fields live on different grids");
}

double ScalarField::min() const { return *std::min_element(values_.begin(), values_.end()); }
double ScalarField::max() const { return *std::max_element(values_.begin(), values_.end()); }

double ScalarField::max_abs() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

bool ScalarField::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

ScalarField& ScalarField::operator+=(const ScalarField& rhs) {
  require_same_grid(rhs);
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += rhs.values_[k];
  return *this;
}

ScalarField& ScalarField::operator-=(const ScalarField& rhs) {
  require_same_grid(rhs);
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= rhs.values_[k];
  return *this;
}

ScalarField& ScalarField::operator*=(const ScalarField& rhs) {
  require_same_grid(rhs);
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] *= rhs.values_[k];
  return *this;
}

ScalarField& ScalarField::operator+=(double a) {
  for (double& v : values_) v += a;
  return *this;
}

ScalarField& ScalarField::operator*=(double a) {
  for (double& v : values_) v *= a;
  return *this;
}

ScalarField exp(const ScalarField& field) {
  return field.map([](double v) { return std::exp(v); });
}

// ---------------------------------------------------------------------------
// FFTW plumbing. Plans are created once per grid size and shared; execution
// through the new-array interface is thread safe.

namespace {

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
using RealBuffer = std::unique_ptr<double[], FftwFree>;
using ComplexBuffer = std::unique_ptr<fftw_complex[], FftwFree>;

RealBuffer alloc_real(std::size_t count) { return RealBuffer(fftw_alloc_real(count)); }
ComplexBuffer alloc_complex(std::size_t count) { return ComplexBuffer(fftw_alloc_complex(count)); }

struct PlanPair {
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;
};

class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [n, p] : plans_) {
      fftw_destroy_plan(p.r2c);
      fftw_destroy_plan(p.c2r);
    }
  }

  PlanPair get(int n) {
    std::lock_guard lock(mutex_);
    auto it = plans_.find(n);
    if (it != plans_.end()) return it->second;
    const std::size_t real_count = static_cast<std::size_t>(n) * n;
    const std::size_t complex_count = static_cast<std::size_t>(n) * (n / 2 + 1);
    RealBuffer r = alloc_real(real_count);
    ComplexBuffer c = alloc_complex(complex_count);
    PlanPair p;
    p.r2c = fftw_plan_dft_r2c_2d(n, n, r.get(), c.get(), FFTW_ESTIMATE);
    p.c2r = fftw_plan_dft_c2r_2d(n, n, c.get(), r.get(), FFTW_ESTIMATE);
    plans_.emplace(n, p);
    return p;
  }

 private:
  std::mutex mutex_;
  std::map<int, PlanPair> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

}  // namespace

SpectralCoeffs::SpectralCoeffs(const GridSpec& grid)
    : grid_(grid), c_(static_cast<std::size_t>(grid.n) * (grid.n / 2 + 1)) {}

double SpectralCoeffs::kappa_x(int a) const {
  return 2.0 * std::numbers::pi * wave_x(a) / grid_.length;
}

double SpectralCoeffs::kappa_y(int b) const {
  return 2.0 * std::numbers::pi * wave_y(b) / grid_.length;
}

double SpectralCoeffs::kappa_squared(int a, int b) const {
  const double kx = kappa_x(a);
  const double ky = kappa_y(b);
  return kx * kx + ky * ky;
}

SpectralCoeffs forward_transform(const ScalarField& field) {
  const GridSpec& g = field.grid();
  g.validate();
  const PlanPair plans = plan_cache().get(g.n);
  SpectralCoeffs out(g);
  const std::size_t complex_count = static_cast<std::size_t>(out.rows()) * out.cols();
  RealBuffer in = alloc_real(g.size());
  ComplexBuffer spec = alloc_complex(complex_count);
  std::memcpy(in.get(), field.values().data(), g.size() * sizeof(double));
  fftw_execute_dft_r2c(plans.r2c, in.get(), spec.get());
  const double scale = 1.0 / static_cast<double>(g.size());
  for (int a = 0; a < out.rows(); ++a)
    for (int b = 0; b < out.cols(); ++b) {
      const auto& z = spec[static_cast<std::size_t>(a) * out.cols() + b];
      out(a, b) = std::complex<double>(z[0], z[1]) * scale;
    }
  return out;
}

ScalarField inverse_transform(const SpectralCoeffs& coeffs) {
  const GridSpec& g = coeffs.grid();
  const PlanPair plans = plan_cache().get(g.n);
  const std::size_t complex_count = static_cast<std::size_t>(coeffs.rows()) * coeffs.cols();
  ComplexBuffer spec = alloc_complex(complex_count);
  RealBuffer out = alloc_real(g.size());
  for (int a = 0; a < coeffs.rows(); ++a)
    for (int b = 0; b < coeffs.cols(); ++b) {
      const auto z = coeffs(a, b);
      auto& dst = spec[static_cast<std::size_t>(a) * coeffs.cols() + b];
      dst[0] = z.real();
      dst[1] = z.imag();
    }
  fftw_execute_dft_c2r(plans.c2r, spec.get(), out.get());
  return ScalarField(g, std::vector<double>(out.get(), out.get() + g.size()));
}

ScalarField apply_radial_symbol(const ScalarField& field,
                                const std::function<double(double)>& symbol) {
  SpectralCoeffs c = forward_transform(field);
  for (int a = 0; a < c.rows(); ++a)
    for (int b = 0; b < c.cols(); ++b) c(a, b) *= symbol(c.kappa_squared(a, b));
  return inverse_transform(c);
}

// ---------------------------------------------------------------------------
// Quadrature and norms

double integrate(const ScalarField& field) {
  const GridSpec& g = field.grid();
  const double h = g.spacing();
  // Row sums first keeps the accumulation error at O(n ε) per row.
  double total = 0.0;
  for (int i = 0; i < g.n; ++i) {
    double row = 0.0;
    for (int j = 0; j < g.n; ++j) row += field(i, j);
    total += row;
  }
  return total * h * h;
}

double mean(const ScalarField& field) { return integrate(field) / field.grid().area(); }

double inner(const ScalarField& a, const ScalarField& b) { return integrate(a * b); }

double l2_norm(const ScalarField& field) { return std::sqrt(inner(field, field)); }

double sup_norm(const ScalarField& field) { return field.max_abs(); }

// ---------------------------------------------------------------------------
// Differential operators

ScalarField laplacian(const ScalarField& field) {
  return apply_radial_symbol(field, [](double k2) { return -k2; });
}

ScalarField inverse_laplacian(const ScalarField& field) {
  return apply_radial_symbol(field, [](double k2) { return k2 > 0.0 ? -1.0 / k2 : 0.0; });
}

std::pair<ScalarField, ScalarField> gradient(const ScalarField& field) {
  const SpectralCoeffs c = forward_transform(field);
  SpectralCoeffs dx(c.grid());
  SpectralCoeffs dy(c.grid());
  const std::complex<double> i_unit(0.0, 1.0);
  for (int a = 0; a < c.rows(); ++a)
    for (int b = 0; b < c.cols(); ++b) {
      dx(a, b) = c.nyquist_x(a) ? 0.0 : i_unit * c.kappa_x(a) * c(a, b);
      dy(a, b) = c.nyquist_y(b) ? 0.0 : i_unit * c.kappa_y(b) * c(a, b);
    }
  return {inverse_transform(dx), inverse_transform(dy)};
}

ScalarField grad_squared(const ScalarField& field) {
  auto [dx, dy] = gradient(field);
  return dx * dx + dy * dy;
}

ScalarField grad_dot(const ScalarField& a, const ScalarField& b) {
  auto [ax, ay] = gradient(a);
  auto [bx, by] = gradient(b);
  return ax * bx + ay * by;
}

double sobolev_norm(const ScalarField& field, int k) {
  if (k < 0) throw PreconditionViolated("Sobolev order must be nonnegative");
  const SpectralCoeffs c = forward_transform(field);
  double total = 0.0;
  for (int a = 0; a < c.rows(); ++a)
    for (int b = 0; b < c.cols(); ++b)
      total += c.column_weight(b) * std::pow(1.0 + c.kappa_squared(a, b), k) * std::norm(c(a, b));
  return std::sqrt(total * field.grid().area());
}

// ---------------------------------------------------------------------------
// Helmholtz solve

ScalarField helmholtz_apply(const ScalarField& c, const ScalarField& u, double q) {
  ScalarField out = apply_radial_symbol(u, [q](double k2) { return k2 + q * q; });
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += q * c[k] * u[k];
  return out;
}

ScalarField helmholtz_solve(const ScalarField& c, const ScalarField& rhs, double q,
                            const HelmholtzOptions& options, HelmholtzReport* report) {
  if (!(c.grid() == rhs.grid())) throw GridMismatch("helmholtz_solve: c and rhs grids differ");
  const double c_max = sup_norm(c);
  if (!(q > c_max))
    throw PreconditionViolated("helmholtz_solve requires q > ||c||_inf (q = " + std::to_string(q) +
                               ", ||c|| = " + std::to_string(c_max) + ")");
  const int max_iter = options.max_iterations > 0 ? options.max_iterations : 10 * rhs.grid().n;
  const auto precondition = [q](const ScalarField& r) {
    return apply_radial_symbol(r, [q](double k2) { return 1.0 / (k2 + q * q); });
  };

  const ScalarField b = rhs * (q * q);
  const double target = options.tol * l2_norm(b);

  // Initial guess: the constant-coefficient solution.
  ScalarField x = precondition(b);
  ScalarField r = b - helmholtz_apply(c, x, q);
  double rnorm = l2_norm(r);
  int it = 0;
  if (rnorm > target) {
    ScalarField z = precondition(r);
    ScalarField p = z;
    double rz = inner(r, z);
    for (it = 1; it <= max_iter; ++it) {
      const ScalarField ap = helmholtz_apply(c, p, q);
      const double alpha = rz / inner(p, ap);
      x += alpha * p;
      r -= alpha * ap;
      rnorm = l2_norm(r);
      if (rnorm <= target) break;
      z = precondition(r);
      const double rz_next = inner(r, z);
      p = z + (rz_next / rz) * p;
      rz = rz_next;
    }
    if (rnorm > target)
      throw NoConvergence("helmholtz_solve: Krylov iteration stalled", max_iter, rnorm);
  }
  if (report) {
    report->iterations = it;
    report->residual = l2_norm(b - helmholtz_apply(c, x, q));
  }
  return x;
}

double torus_distance(const GridSpec& grid, double x0, double y0, double x1, double y1) {
  const double l = grid.length;
  auto wrap = [l](double d) {
    d = std::fmod(std::abs(d), l);
    return std::min(d, l - d);
  };
  return std::hypot(wrap(x1 - x0), wrap(y1 - y0));
}

}  // namespace mcsv
