#include "mcsv/vortex_background.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "mcsv/errors.hpp"

namespace mcsv {

int VortexConfig::total_number() const {
  int n = 0;
  for (const auto& p : points) n += p.multiplicity;
  return n;
}

void VortexConfig::validate(const GridSpec& grid) const {
  grid.validate();
  for (std::size_t a = 0; a < points.size(); ++a) {
    const Vortex& p = points[a];
    if (p.multiplicity < 1) throw PreconditionViolated("vortex multiplicity must be a positive integer");
    if (!(p.x >= 0.0 && p.x < 1.0 && p.y >= 0.0 && p.y < 1.0))
      throw PreconditionViolated("vortex position must lie in [0,1)^2");
    for (std::size_t b = 0; b < a; ++b)
      if (points[b].x == p.x && points[b].y == p.y)
        throw PreconditionViolated("vortex points must be pairwise distinct");
  }
  if (sigma_cells < 2.0)
    throw SigmaTooSmall("mollification width must be at least 2 grid cells, got " +
                        std::to_string(sigma_cells));
}

double BackgroundData::source_density() const {
  return 4.0 * std::numbers::pi * n / grid().area();
}

ScalarField mollified_delta(double x, double y, double sigma, const GridSpec& grid) {
  grid.validate();
  if (sigma < 2.0 * grid.spacing())
    throw SigmaTooSmall("mollification width below two grid cells");
  const double l = grid.length;
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  // Omitted images sit at least (images)·L away: exp(-L^2/(2σ^2)·images^2)
  // is below 1e-30 with this count.
  const int images = 1 + static_cast<int>(std::ceil(12.0 * sigma / l));
  ScalarField out = ScalarField::from_function(grid, [&](double gx, double gy) {
    double acc = 0.0;
    for (int a = -images; a <= images; ++a)
      for (int b = -images; b <= images; ++b) {
        const double dx = gx - x + a * l;
        const double dy = gy - y + b * l;
        acc += std::exp(-(dx * dx + dy * dy) * inv2s2);
      }
    return acc;
  });
  return out * (1.0 / integrate(out));
}

BackgroundData compute_u0(const VortexConfig& config, const GridSpec& grid) {
  config.validate(grid);
  BackgroundData bg;
  bg.n = config.total_number();
  bg.sigma = config.sigma(grid);
  bg.points = config.points;
  bg.source = ScalarField(grid, 0.0);
  for (const auto& p : config.points)
    bg.source += static_cast<double>(p.multiplicity) *
                 mollified_delta(p.x * grid.length, p.y * grid.length, bg.sigma, grid);

  // -Δu0 = 4π(n/|Σ| - ρ); the right-hand side has zero mean by construction.
  const double density = bg.n / grid.area();
  const ScalarField rhs = (bg.source - density) * (4.0 * std::numbers::pi);
  bg.u0 = inverse_laplacian(rhs);
  bg.exp_u0 = exp(bg.u0);
  bg.weight = background_weight(bg.u0, bg.n);
  return bg;
}

ScalarField background_weight(const ScalarField& u0, int n) {
  const ScalarField e = exp(u0);
  const ScalarField lap_u0 = laplacian(u0);
  // ρ = n/|Σ| + Δu0/(4π)
  const double density = n / u0.grid().area();
  const ScalarField rho = lap_u0 * (1.0 / (4.0 * std::numbers::pi)) + density;
  return laplacian(e) + e * (4.0 * std::numbers::pi * density) - e * rho * (4.0 * std::numbers::pi);
}

}  // namespace mcsv
