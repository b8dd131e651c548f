// Discrete operators on torus phase grids: P = V G_E, P* = (G_E + Vlambda)V,
// the high-mode projections T_m and Q_m = T_m V G_E, empirical control
// constants and the constructive invariant-function recipes (least squares
// by conjugate gradients on the normal equations).
#pragma once

#include <functional>
#include <optional>

#include "thermoray/phase.hpp"
#include "thermoray/rng.hpp"

namespace thermoray::inverse {

using geom::ChartPtr;
using geom::ExternalField;
using grid::CGrid;
using grid::cplx;

// Gridded vertical-Fourier stack on a torus chart (the coefficient space of
// the discrete operators). Spectral x/y derivatives keep the formula
// adjoints consistent to aliasing level.
class StackGrid {
 public:
  StackGrid() = default;
  StackGrid(ChartPtr chart, int kmax);
  static StackGrid from_phase(const phase::PhaseFunction& u);
  phase::PhaseFunction to_phase() const;

  const ChartPtr& chart() const { return chart_; }
  int kmax() const { return kmax_; }
  CGrid& mode(int k) { return modes_[static_cast<std::size_t>(k + kmax_)]; }
  const CGrid& mode(int k) const { return modes_[static_cast<std::size_t>(k + kmax_)]; }

  StackGrid& axpy(double a, const StackGrid& x);  // this += a x
  StackGrid& scale(double a);
  void set_zero();

 private:
  ChartPtr chart_;
  int kmax_ = 0;
  std::vector<CGrid> modes_;
};

// Weighted L2(SM) pairing matching phase::inner_product.
cplx dot(const StackGrid& a, const StackGrid& b);
double norm(const StackGrid& a);

// Operator pack bound to a torus frame.
class TorusOperators {
 public:
  TorusOperators(ChartPtr chart, const ExternalField& field, int kmax);

  const phase::Frame& frame() const { return frame_; }
  const ChartPtr& chart() const { return chart_; }
  int kmax() const { return kmax_; }

  StackGrid v(const StackGrid& u) const;
  StackGrid generator(const StackGrid& u) const;        // G_E
  StackGrid xperp(const StackGrid& u) const;
  StackGrid mult_vlambda(const StackGrid& u) const;
  StackGrid p(const StackGrid& u) const;                // V G_E
  StackGrid pstar(const StackGrid& u) const;            // (G_E + Vlambda) V
  StackGrid tm(const StackGrid& u, int m) const;        // keep |k| >= m+1
  StackGrid qm(const StackGrid& u, int m) const;        // T_m V G_E
  StackGrid qmstar(const StackGrid& u, int m) const;    // (G_E + Vlambda) V T_m

  double h1_norm_sq(const StackGrid& u) const;
  cplx mean(const StackGrid& u) const;                  // <u, 1>

 private:
  ChartPtr chart_;
  int kmax_;
  phase::Frame frame_;
  CGrid emrho_, lam_p_, lam_m_;
  CGrid del_rho_, delbar_rho_;  // (rho_x -+ i rho_y)/2
  StackGrid ladder(const StackGrid& u, bool plus, bool with_lambda) const;
};

struct AdjointCheck {
  double p_defect = 0.0;   // |<Pu,v> - <u,P*v>| / (|u||v|)
  double q_defect = 0.0;
};
AdjointCheck adjoint_consistency(const TorusOperators& ops, int m, rng::Rng& rng, int samples = 5);

struct ControlConstants {
  double c_p = 0.0;  // max ||u||_H1 / ||P u|| over the samples (lower bound)
  double c_q = 0.0;
  int samples = 0;
  int degenerate = 0;  // samples with ||Pu|| ~ 0, counterexample candidates
};
ControlConstants estimate_control_constants(const TorusOperators& ops, int m, int samples,
                                            rng::Rng& rng);

struct SolveReport {
  std::string operator_name;
  double rhs_norm = 0.0;
  double residual = 0.0;          // ||B h - rhs||
  double rel_residual = 0.0;
  double normal_residual = 0.0;   // ||B^T(B h - rhs)|| / ||B^T rhs||
  int iterations = 0;
  bool converged = false;
};

// CGNR least squares for B h = rhs with B^T supplied explicitly; stops at
// rel_tol on the normal residual, stagnation, or max_iter.
SolveReport cgnr(const std::function<StackGrid(const StackGrid&)>& B,
                 const std::function<StackGrid(const StackGrid&)>& Bt, const StackGrid& rhs,
                 StackGrid& h, double rel_tol, int max_iter, const std::string& name);

struct InvariantFunctionResult {
  StackGrid w;
  SolveReport solve;
  double invariance_residual = 0.0;  // ||(G_E + Vlambda) w - a||
  double w0_defect = 0.0;            // sup |w_0 - f| (should be bit-zero)
};

// Solves P* h = a - (G_E + Vlambda) f and returns w = V h + f, so that
// w_0 = f exactly and (G_E + Vlambda) w = a up to the solver residual.
InvariantFunctionResult construct_invariant_function(const TorusOperators& ops,
                                                     const expr::Expr& f, const StackGrid* a,
                                                     double rel_tol = 1e-8, int max_iter = -1);

struct OneFormResult {
  StackGrid w;
  SolveReport solve;
  double invariance_residual = 0.0;
  double a0_norm = 0.0;             // ||(rhs)_0||, must vanish for solenoidal input
  double w_pm1_defect = 0.0;        // sup |(w_{-1}+w_1) - alpha| (bit-zero)
  double solenoid_residual = 0.0;   // eta_+ alpha_{-1} + eta_- alpha_1
};

// alpha given by its coordinate 1-form components (a dx + b dy).
OneFormResult construct_invariant_oneform(const TorusOperators& ops, const expr::Expr& a,
                                          const expr::Expr& b, double rel_tol = 1e-8,
                                          int max_iter = -1);

struct OneFormGrid {
  ChartPtr chart;
  grid::RGrid a, b;
  double solenoid_residual = 0.0;  // L2 norm of the eta_+/eta_- combination
};

// alpha - d psi with the potential from a spectral Poisson solve; the output
// passes the eta_+/eta_- solenoidality check.
OneFormGrid solenoidal_project(const ChartPtr& chart, const expr::Expr& a, const expr::Expr& b);

// The eta check residual for closed-form 1-forms (diagnostic).
double solenoid_residual(const ChartPtr& chart, const expr::Expr& a, const expr::Expr& b);

}  // namespace thermoray::inverse
