#pragma once

// Vortex background: mollified Dirac sources, the mean-zero Green's function
// u0 with -Δu0 = 4π(n/|Σ| - ρ), ρ = Σ m_j δ^σ_{p_j}, and the smooth weight
// e^{u0}|∇u0|^2.

#include <vector>

#include "mcsv/torus_grid.hpp"

namespace mcsv {

struct Vortex {
  double x = 0.0;  ///< position as a fraction of the period, in [0, 1)
  double y = 0.0;
  int multiplicity = 1;
};

struct VortexConfig {
  std::vector<Vortex> points;
  double sigma_cells = 4.0;  ///< mollification width in units of the grid spacing

  int total_number() const;
  double sigma(const GridSpec& grid) const { return sigma_cells * grid.spacing(); }
  /// Throws PreconditionViolated / SigmaTooSmall on invalid data.
  void validate(const GridSpec& grid) const;
};

struct BackgroundData {
  ScalarField u0;
  ScalarField exp_u0;
  ScalarField weight;  ///< e^{u0}|∇u0|^2 assembled from Δe^{u0}
  ScalarField source;  ///< ρ = Σ m_j δ^σ_{p_j}, integral n
  int n = 0;
  double sigma = 0.0;  ///< physical mollification width
  std::vector<Vortex> points;

  const GridSpec& grid() const { return u0.grid(); }
  /// 4πn/|Σ|, the constant source density balancing the vortices.
  double source_density() const;
};

/// Periodic Gaussian of width sigma centred at (x, y) (physical units),
/// rescaled so that its quadrature is exactly 1.
ScalarField mollified_delta(double x, double y, double sigma, const GridSpec& grid);

BackgroundData compute_u0(const VortexConfig& config, const GridSpec& grid);

/// Δe^{u0} - e^{u0}Δu0, i.e. Δe^{u0} + (4πn/|Σ|) e^{u0} - 4π e^{u0} ρ with ρ
/// recovered from u0. Equals e^{u0}|∇u0|^2 without forming ∇u0.
ScalarField background_weight(const ScalarField& u0, int n);

}  // namespace mcsv
