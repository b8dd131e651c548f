// Surface geometry in isothermal coordinates: curvature, divergence,
// thermostat curvature, conformal normalization, Gauss-Bonnet quadrature and
// boundary convexity margins.
#pragma once

#include <iosfwd>

#include "thermoray/chart.hpp"

namespace thermoray::geom {

struct ScalarField {
  ChartPtr chart;
  grid::RGrid values;

  double sup_norm() const;
  void to_csv(std::ostream& os) const;  // rows: x, y, value
};

// Symbolic coordinate expressions (shared by the samplers and the phase
// space frame, which needs them as closed forms).
expr::Expr gaussian_curvature_expr(const IsothermalChart& chart);
expr::Expr divergence_expr(const IsothermalChart& chart, const ExternalField& field);
expr::Expr thermostat_curvature_expr(const IsothermalChart& chart, const ExternalField& field);

ScalarField gaussian_curvature(const ChartPtr& chart);
ScalarField divergence(const ChartPtr& chart, const ExternalField& field);
ScalarField thermostat_curvature(const ChartPtr& chart, const ExternalField& field);

struct NormalizeResult {
  ScalarField sigma;        // zero-mean solution of the curvature equation
  double c = 0.0;           // normalized curvature level (0 on the torus)
  double poisson_residual = 0.0;
  double kthermo_sup = 0.0; // sup |K~ - e^{-2 sigma} c| after rescaling
};

// Solves lap_g sigma = K - div_g E - c on a torus chart, with c fixed by the
// compatibility integral; afterwards the rescaled thermostat curvature is
// the constant e^{-2 sigma} c.
NormalizeResult conformal_normalize(const ChartPtr& chart, const ExternalField& field);

// integral of K dVol_g; torus by periodic trapezoid, disk by a polar-grid
// rule (theta-trapezoid x radial Simpson) so smooth integrands are not
// polluted by the boundary cut of the Cartesian mask.
double gauss_bonnet(const ChartPtr& chart);

// Generic polar quadrature over the disk chart for smooth integrands.
double disk_integral_polar(const IsothermalChart& chart, const expr::Expr& integrand,
                           int n_r = 513, int n_theta = 512);

struct ConvexityReport {
  double margin = 0.0;        // min over samples of k_g - <E - <E,v>v, nu>
  double boundary_curvature_min = 0.0;
  int n_boundary = 0, n_directions = 0;
  bool strictly_convex() const { return margin > 0.0; }
};

// Samples S(boundary): n_b points on the boundary circle x the full unit
// fiber of directions. For tangent directions the sampled quantity is the
// strict thermostat convexity margin; other directions use the same
// curvature against the projected field term, a conservative certificate.
ConvexityReport boundary_convexity(const ChartPtr& chart, const ExternalField& field,
                                   int n_boundary = 512, int n_directions = 64);

}  // namespace thermoray::geom
