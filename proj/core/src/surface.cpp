#include "thermoray/surface.hpp"

#include <cmath>
#include <limits>
#include <ostream>

namespace thermoray::geom {

double ScalarField::sup_norm() const {
  double m = 0.0;
  for (int j = 0; j < values.ny; ++j)
    for (int i = 0; i < values.nx; ++i)
      if (chart->node_inside(i, j)) m = std::max(m, std::abs(values.at(i, j)));
  return m;
}

void ScalarField::to_csv(std::ostream& os) const {
  os << "x,y,value\n";
  char buf[128];
  for (int j = 0; j < values.ny; ++j)
    for (int i = 0; i < values.nx; ++i) {
      if (!chart->node_inside(i, j)) continue;
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", chart->x_of(i), chart->y_of(j),
                    values.at(i, j));
      os << buf;
    }
}

expr::Expr gaussian_curvature_expr(const IsothermalChart& chart) {
  using expr::constant;
  expr::Expr lap = chart.rho_xx() + chart.rho_yy();
  return -call(expr::Fn::Exp, constant(-2.0) * chart.rho()) * lap;
}

expr::Expr divergence_expr(const IsothermalChart& chart, const ExternalField& f) {
  using expr::constant;
  return f.e1_x() + f.e2_y() +
         constant(2.0) * (chart.rho_x() * f.e1() + chart.rho_y() * f.e2());
}

expr::Expr thermostat_curvature_expr(const IsothermalChart& chart, const ExternalField& f) {
  return gaussian_curvature_expr(chart) - divergence_expr(chart, f);
}

ScalarField gaussian_curvature(const ChartPtr& chart) {
  return {chart, chart->sample(gaussian_curvature_expr(*chart))};
}

ScalarField divergence(const ChartPtr& chart, const ExternalField& field) {
  field.validate_on(*chart);
  return {chart, chart->sample(divergence_expr(*chart, field))};
}

ScalarField thermostat_curvature(const ChartPtr& chart, const ExternalField& field) {
  field.validate_on(*chart);
  return {chart, chart->sample(thermostat_curvature_expr(*chart, field))};
}

NormalizeResult conformal_normalize(const ChartPtr& chart, const ExternalField& field) {
  if (!chart->is_torus())
    throw ConfigError("conformal_normalize needs a closed (torus) chart");
  field.validate_on(*chart);

  const int nx = chart->nx(), ny = chart->ny();
  grid::RGrid kd = chart->sample(thermostat_curvature_expr(*chart, field));

  // c = integral (K - div E) dVol / Vol; on the torus this is 0 up to
  // quadrature error because chi = 0 and the divergence integrates away.
  double num = 0.0, vol = 0.0;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      double w = chart->quad_weight(i, j) * chart->e2rho().at(i, j);
      num += w * kd.at(i, j);
      vol += w;
    }
  double c = num / vol;

  // lap_g sigma = K - divE - c  =>  flat lap sigma = e^{2rho}(K - divE - c)
  grid::CGrid rhs(nx, ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      rhs.at(i, j) = chart->e2rho().at(i, j) * (kd.at(i, j) - c);
  grid::CGrid sig = grid::spectral_poisson(rhs, chart->extent());

  // residual of the discrete solve: flat-lap sigma vs rhs
  grid::CGrid lx = grid::spectral_ddx(grid::spectral_ddx(sig, chart->extent()), chart->extent());
  grid::CGrid ly = grid::spectral_ddy(grid::spectral_ddy(sig, chart->extent()), chart->extent());
  double res = 0.0, scale = 0.0;
  for (std::size_t n = 0; n < rhs.size(); ++n) {
    res = std::max(res, std::abs((lx.a[n] + ly.a[n] - rhs.a[n]).real()));
    scale = std::max(scale, std::abs(rhs.a[n].real()));
  }

  NormalizeResult out;
  out.c = c;
  out.poisson_residual = scale > 0 ? res / scale : res;
  out.sigma = {chart, grid::RGrid(nx, ny, 0.0)};
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) out.sigma.values.at(i, j) = sig.at(i, j).real();

  // K~ after rescaling = e^{-2 sigma}(K - lap_g sigma - div E); with the
  // discrete solve this collapses to e^{-2 sigma} c plus the residual.
  double sup = 0.0;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      double lap_flat = (lx.at(i, j) + ly.at(i, j)).real();
      double lap_g = lap_flat / chart->e2rho().at(i, j);
      double kt = std::exp(-2.0 * out.sigma.values.at(i, j)) * (kd.at(i, j) - lap_g);
      sup = std::max(sup, std::abs(kt - std::exp(-2.0 * out.sigma.values.at(i, j)) * c));
    }
  out.kthermo_sup = sup;
  return out;
}

double disk_integral_polar(const IsothermalChart& chart, const expr::Expr& integrand, int n_r,
                           int n_theta) {
  if (chart.is_torus()) throw ConfigError("polar quadrature is for disk charts");
  if (n_r % 2 == 0) ++n_r;  // Simpson needs an odd node count
  expr::Tape t(integrand);
  const double R = chart.extent();
  const double dr = R / (n_r - 1);
  const double dth = 2.0 * M_PI / n_theta;
  double total = 0.0;
  for (int a = 0; a < n_r; ++a) {
    double r = a * dr;
    double wr = (a == 0 || a == n_r - 1) ? 1.0 : (a % 2 == 1 ? 4.0 : 2.0);
    double ring = 0.0;
    for (int b = 0; b < n_theta; ++b) {
      double th = b * dth;
      ring += t(r * std::cos(th), r * std::sin(th));
    }
    total += wr * ring * r;
  }
  return total * dr / 3.0 * dth;
}

double gauss_bonnet(const ChartPtr& chart) {
  expr::Expr k = gaussian_curvature_expr(*chart);
  expr::Expr integrand = k * call(expr::Fn::Exp, expr::constant(2.0) * chart->rho());
  if (chart->is_torus()) {
    expr::Tape t(integrand);
    double sum = 0.0;
    for (int j = 0; j < chart->ny(); ++j)
      for (int i = 0; i < chart->nx(); ++i)
        sum += t(chart->x_of(i), chart->y_of(j));
    return sum * chart->cell_area();
  }
  return disk_integral_polar(*chart, integrand);
}

ConvexityReport boundary_convexity(const ChartPtr& chart, const ExternalField& field,
                                   int n_boundary, int n_directions) {
  if (chart->is_torus()) throw ConfigError("boundary_convexity needs a disk chart");
  const double R = chart->extent();
  expr::Tape rho(chart->rho()), rho_x(chart->rho_x()), rho_y(chart->rho_y());
  expr::Tape e1(field.e1()), e2(field.e2());

  ConvexityReport rep;
  rep.n_boundary = n_boundary;
  rep.n_directions = n_directions;
  double margin = std::numeric_limits<double>::infinity();
  double kmin = std::numeric_limits<double>::infinity();

  for (int a = 0; a < n_boundary; ++a) {
    double psi = 2.0 * M_PI * a / n_boundary;
    double cx = std::cos(psi), sy = std::sin(psi);
    double px = R * cx, py = R * sy;
    double rv = rho(px, py);
    double er = std::exp(rv);
    // conformal law for the geodesic curvature of the circle r = R,
    // radial derivative taken outward
    double drho_dr = rho_x(px, py) * cx + rho_y(px, py) * sy;
    double kg = std::exp(-rv) * (1.0 / R + drho_dr);
    kmin = std::min(kmin, kg);

    double ex = e1(px, py), ey = e2(px, py);
    // g-inner products: <a,b>_g = e^{2rho} (a.b) for coordinate vectors;
    // nu is the inward g-unit normal, v runs over the unit fiber.
    for (int b = 0; b < n_directions; ++b) {
      double phi = 2.0 * M_PI * b / n_directions;
      double vx = std::cos(phi), vy = std::sin(phi);  // e^{-rho}(vx,vy) is g-unit
      double Ev = er * (ex * vx + ey * vy);           // <E, v>_g
      double Enu = -er * (ex * cx + ey * sy);         // <E, nu>_g
      double vnu = -(vx * cx + vy * sy);              // <v, nu>_g
      double rhs = Enu - Ev * vnu;
      margin = std::min(margin, kg - rhs);
    }
  }
  rep.margin = margin;
  rep.boundary_curvature_min = kmin;
  return rep;
}

}  // namespace thermoray::geom
