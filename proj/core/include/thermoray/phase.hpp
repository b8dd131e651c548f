// Calculus on the circle bundle SM of an isothermal chart. Functions are
// stored as vertical Fourier stacks {u_k}, each coefficient either a closed
// form (derivatives taken symbolically) or a sampled grid (spectral
// derivatives on the torus, 4th-order central differences on the disk).
//
// The fiber direction is always handled exactly: V multiplies mode k by ik,
// multiplication by the 1-form coefficients shifts modes by +-1.
#pragma once

#include <complex>
#include <optional>
#include <vector>

#include "thermoray/chart.hpp"
#include "thermoray/surface.hpp"

namespace thermoray::phase {

using geom::ChartPtr;
using geom::ExternalField;
using geom::IsothermalChart;
using grid::CGrid;
using grid::cplx;

// Complex-valued closed-form coefficient, kept as a (re, im) pair of trees.
struct ComplexExpr {
  expr::Expr re, im;

  ComplexExpr() = default;
  ComplexExpr(expr::Expr r, expr::Expr i) : re(std::move(r)), im(std::move(i)) {}
  static ComplexExpr real(expr::Expr r) { return {std::move(r), expr::constant(0.0)}; }
  static ComplexExpr constant(cplx c) {
    return {expr::constant(c.real()), expr::constant(c.imag())};
  }

  ComplexExpr operator+(const ComplexExpr& o) const { return {re + o.re, im + o.im}; }
  ComplexExpr operator-(const ComplexExpr& o) const { return {re - o.re, im - o.im}; }
  ComplexExpr operator*(const ComplexExpr& o) const {
    return {re * o.re - im * o.im, re * o.im + im * o.re};
  }
  ComplexExpr operator*(const expr::Expr& s) const { return {re * s, im * s}; }
  ComplexExpr times_i() const { return {-im, re}; }
  ComplexExpr conj() const { return {re, -im}; }
  ComplexExpr ddx() const {
    return {expr::differentiate(re, expr::Var::X), expr::differentiate(im, expr::Var::X)};
  }
  ComplexExpr ddy() const {
    return {expr::differentiate(re, expr::Var::Y), expr::differentiate(im, expr::Var::Y)};
  }
  // d = (d/dx - i d/dy)/2 and its conjugate
  ComplexExpr del() const;
  ComplexExpr delbar() const;
};

// Function on SM as a vertical Fourier stack over a fixed chart.
class PhaseFunction {
 public:
  PhaseFunction() = default;
  PhaseFunction(ChartPtr chart, int kmax);
  static PhaseFunction zero(ChartPtr chart) { return PhaseFunction(chart, chart->kmax()); }

  const ChartPtr& chart() const { return chart_; }
  int kmax() const { return kmax_; }

  bool has_mode(int k) const;
  bool mode_is_symbolic(int k) const;
  const ComplexExpr& mode_expr(int k) const;
  void set_mode(int k, ComplexExpr c);
  void set_mode_grid(int k, CGrid g);
  void add_mode(int k, const ComplexExpr& c);     // symbolic accumulate
  void add_mode_grid(int k, const CGrid& g);

  // Sampled coefficient grid (symbolic coefficients are evaluated and
  // cached; masked-out disk nodes hold 0).
  const CGrid& mode_samples(int k) const;

  // Pointwise resynthesis u(x, y, phi) = sum_k u_k(x,y) e^{i k phi} at a
  // grid node.
  cplx value_at(int i, int j, double phi) const;

  std::vector<int> support() const;               // modes with data
  int max_abs_mode() const;
  bool supported_within(int deg) const;           // support subset |k| <= deg

  PhaseFunction truncated(int deg_low) const;     // keep only |k| >= deg_low
  PhaseFunction mode_projection(int k) const;     // single-mode part

  // Interior-support tagging for disk-domain hypotheses.
  void set_boundary_vanishing(bool b) { boundary_vanishing_ = b; }
  bool boundary_vanishing() const { return boundary_vanishing_; }

 private:
  ChartPtr chart_;
  int kmax_ = 0;
  struct Mode {
    std::optional<ComplexExpr> sym;
    std::optional<CGrid> grid;
    mutable std::optional<CGrid> cache;
  };
  std::vector<Mode> modes_;
  bool boundary_vanishing_ = false;
  Mode& slot(int k);
  const Mode& slot(int k) const;
};

// Thermostat frame data bound to (chart, E): the 1-form coefficients of
// lambda, the thermostat curvature and the closed forms every operator
// needs. Immutable and shareable.
class Frame {
 public:
  Frame(ChartPtr chart, ExternalField field);

  const ChartPtr& chart() const { return chart_; }
  const ExternalField& field() const { return field_; }

  const ComplexExpr& lambda_plus() const { return lambda_plus_; }    // coeff of e^{i phi}
  const ComplexExpr& lambda_minus() const { return lambda_minus_; }  // coeff of e^{-i phi}
  const expr::Expr& kthermo() const { return kthermo_; }
  const expr::Expr& gauss() const { return gauss_; }
  const expr::Expr& dive() const { return dive_; }

  // lambda(x,y,phi) and V lambda(x,y,phi) evaluated directly from <E, iv>
  // (used by invariant tests against the mode stack).
  double lambda_direct(double x, double y, double phi) const;
  double vlambda_direct(double x, double y, double phi) const;

  // phi-projection of lambda onto modes +-1 (numerical cross-check of the
  // closed-form coefficients) and the residual in all other modes.
  struct LambdaProjection {
    cplx plus, minus;
    double other_modes_sup;
  };
  LambdaProjection project_lambda(double x, double y) const;

  // Sampled coefficient fields for the grid operator path.
  struct Grids {
    CGrid emrho, rho_x, rho_y, lam_p, lam_m;
  };
  const Grids& grids() const { return grids_; }

 private:
  ChartPtr chart_;
  ExternalField field_;
  ComplexExpr lambda_plus_, lambda_minus_;
  expr::Expr kthermo_, gauss_, dive_;
  Grids grids_;
  mutable expr::Tape t_rho_, t_e1_, t_e2_;
};

enum class FrameOp { X, XPerp, V, Generator, EtaPlus, EtaMinus, MuPlus, MuMinus };

// Applies a frame operator; symbolic coefficients stay symbolic. Grid
// coefficients use spectral derivatives on the torus and interior 4th-order
// stencils on the disk.
PhaseFunction apply(FrameOp op, const PhaseFunction& u, const Frame& fr);

// Multiplication by lambda (mode shift +-1) and by V(lambda).
PhaseFunction mult_lambda(const PhaseFunction& u, const Frame& fr);
PhaseFunction mult_vlambda(const PhaseFunction& u, const Frame& fr);

// X_perp u - V(lambda) V u, the commutator [G_E, V] u.
PhaseFunction horizontal_twist(const PhaseFunction& u, const Frame& fr);

// Independent closed-form route for mu_+ on a single mode u = h e^{im phi}:
// e^{(m-1)rho} (del - m e^{2rho} alpha_z)(h e^{-m rho}) at mode m+1 with
// alpha_z = (E1 - i E2)/2.
PhaseFunction mu_plus_coordinate(const PhaseFunction& u_single_mode, const Frame& fr);

// L2(SM) pairing with the volume e^{2rho} dx dy dphi; rendered as
// 2 pi sum_k <u_k, v_k>_{L2(M, e^{2rho})} (exact in the fiber direction).
cplx inner_product(const PhaseFunction& u, const PhaseFunction& v, const Frame& fr);
double norm_sq(const PhaseFunction& u, const Frame& fr);

// Same pairing but with the disk integrals on a polar grid (full-domain
// smooth integrands; the Cartesian mask is only accurate for interior-
// supported data).
cplx inner_product_polar(const PhaseFunction& u, const PhaseFunction& v, const Frame& fr,
                         int n_r = 257, int n_theta = 256);

double h1_norm_sq(const PhaseFunction& u, const Frame& fr);

// Multiplication by a real scalar field given in closed form.
PhaseFunction mult_scalar(const PhaseFunction& u, const expr::Expr& s);

// sup over grid nodes of |u| restricted to radius <= r_frac * R (disk);
// used by hypothesis checks on interior support.
double sup_outside_radius(const PhaseFunction& u, double r_frac);

}  // namespace thermoray::phase
