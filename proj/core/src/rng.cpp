#include "thermoray/rng.hpp"

#include <cmath>

namespace thermoray::rng {

using expr::constant;
using expr::Expr;

Expr random_trig_poly(Rng& rng, double L, int deg, double amplitude) {
  // sum over lattice modes (j,k), j >= 0 WLOG (cos/sin pairs carry the sign)
  Expr xe = expr::var_x(), ye = expr::var_y();
  double w = 2.0 * M_PI / L;
  int terms = 0;
  for (int j = 0; j <= deg; ++j)
    for (int k = -deg; k <= deg; ++k)
      if (!(j == 0 && k <= 0)) ++terms;
  double scale = amplitude / std::sqrt(static_cast<double>(terms));
  Expr sum = constant(0.0);
  for (int j = 0; j <= deg; ++j) {
    for (int k = -deg; k <= deg; ++k) {
      if (j == 0 && k <= 0) continue;
      double a = rng.uniform(-scale, scale);
      double b = rng.uniform(-scale, scale);
      Expr arg = constant(w * j) * xe + constant(w * k) * ye;
      sum = sum + constant(a) * call(expr::Fn::Cos, arg) + constant(b) * call(expr::Fn::Sin, arg);
    }
  }
  return sum;
}

phase::ComplexExpr random_complex_trig(Rng& rng, double L, int deg, double amplitude) {
  Expr re = random_trig_poly(rng, L, deg, amplitude);
  Expr im = random_trig_poly(rng, L, deg, amplitude);
  return {re, im};
}

phase::PhaseFunction random_bandlimited(Rng& rng, const geom::ChartPtr& chart, int phi_deg,
                                        int spatial_deg, double amplitude) {
  return random_bandlimited_from(rng, chart, 0, phi_deg, spatial_deg, amplitude);
}

phase::PhaseFunction random_bandlimited_from(Rng& rng, const geom::ChartPtr& chart, int k_low,
                                             int phi_deg, int spatial_deg, double amplitude) {
  phase::PhaseFunction u(chart, chart->kmax());
  for (int k = -phi_deg; k <= phi_deg; ++k) {
    if (std::abs(k) < k_low) continue;
    u.set_mode(k, random_complex_trig(rng, chart->extent(), spatial_deg, amplitude));
  }
  return u;
}

Expr random_polynomial(Rng& rng, int deg, double amplitude) {
  Expr xe = expr::var_x(), ye = expr::var_y();
  Expr sum = constant(0.0);
  for (int a = 0; a <= deg; ++a) {
    for (int b = 0; a + b <= deg; ++b) {
      double c = rng.uniform(-amplitude, amplitude);
      Expr term = constant(c);
      for (int i = 0; i < a; ++i) term = term * xe;
      for (int i = 0; i < b; ++i) term = term * ye;
      sum = sum + term;
    }
  }
  return sum;
}

phase::PhaseFunction random_interior_supported(Rng& rng, const geom::ChartPtr& chart, int phi_deg,
                                               int poly_deg, double amplitude,
                                               double r_support_frac) {
  double rs = r_support_frac * chart->extent();
  double beta = 32.0 / (rs * rs);  // e^{-32} ~ 1e-14 at the support radius
  Expr envelope = call(expr::Fn::Exp,
                       constant(-beta) * (expr::var_x() * expr::var_x() +
                                          expr::var_y() * expr::var_y()));
  phase::PhaseFunction u(chart, chart->kmax());
  for (int k = -phi_deg; k <= phi_deg; ++k) {
    Expr re = random_polynomial(rng, poly_deg, amplitude) * envelope;
    Expr im = random_polynomial(rng, poly_deg, amplitude) * envelope;
    u.set_mode(k, phase::ComplexExpr(re, im));
  }
  u.set_boundary_vanishing(true);
  return u;
}

}  // namespace thermoray::rng
