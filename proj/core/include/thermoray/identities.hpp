// Quadrature verification of the integral identities satisfied by the
// thermostat frame: structure equations, adjoint relations, the Pestov
// identity and its Fourier-mode consequences.
#pragma once

#include <string>
#include <vector>

#include "thermoray/phase.hpp"

namespace thermoray::phase {

using geom::HypothesisError;

struct ResidualRecord {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double abs_residual = 0.0;
  double rel_residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

ResidualRecord make_record(const std::string& name, double lhs, double rhs, double tol);

// Sup-norm residuals of X = [V, X_perp], X_perp = [X, V], [X, X_perp] = -K V
// applied to a symbolic test function.
ResidualRecord check_structure_equations(const Frame& fr, const PhaseFunction& u,
                                         double tol = 1e-6);

// integral G_E(f) dSigma^3 + integral f V(lambda) dSigma^3 = 0 (torus).
ResidualRecord check_lie_derivative(const Frame& fr, const PhaseFunction& f, double tol = 1e-6);

// (Vu,v)+(u,Vv) = 0; (X_perp u,v)+(u,X_perp v) = 0;
// (G_E u,v)+(u,G_E v)+(V(lambda) u, v) = 0.
std::vector<ResidualRecord> check_adjoints(const Frame& fr, const PhaseFunction& u,
                                           const PhaseFunction& v, double tol = 1e-6);

// ||G_E V u||^2 - (K_thermo V u, V u) = ||V G_E u||^2 - ||G_E u||^2.
// boundary = true additionally requires interior-supported u on a disk.
ResidualRecord check_pestov(const Frame& fr, const PhaseFunction& u, bool boundary = false,
                            double tol = 1e-6);

// [G_E, V] u = X_perp u - V(lambda) V u, sup-norm over the stack.
ResidualRecord check_commutator(const Frame& fr, const PhaseFunction& u, double tol = 1e-6);

// X_perp u - V(lambda) V u = i mu_- u - i mu_+ u.
ResidualRecord check_mu_decomposition(const Frame& fr, const PhaseFunction& u, double tol = 1e-6);

// 2k ||mu_- u||^2 = 2k ||mu_+ u||^2 + k^2 (K_thermo u, u) for u in Omega_k.
ResidualRecord check_gk_identity(const Frame& fr, const PhaseFunction& u, double tol = 1e-6);

// The three norm expansions of ||G_E u||^2, ||G_E V u||^2, ||V G_E u||^2 for
// u supported in |k| >= m. For m = 1 the two corner terms that share Omega_0
// are grouped (they are not orthogonal there).
std::vector<ResidualRecord> check_prop1_expansions(const Frame& fr, const PhaseFunction& u, int m,
                                                   double tol = 1e-6);

// The control inequality ||Q_m u||^2 >= c_m (corner terms) + ||v||^2 +
// alpha ||w||^2 for alpha-controlled configurations.
ResidualRecord check_prop1_inequality(const Frame& fr, const PhaseFunction& u, int m, double alpha,
                                      double tol = 1e-6);

// mu_+ + mu_- = G_E as operators: sup-norm discrepancy on a test stack.
ResidualRecord check_mu_sum(const Frame& fr, const PhaseFunction& u, double tol = 1e-12);

// Pointwise equality of the two thermostat curvature expressions
// K - div E and K + X_perp lambda + lambda^2 + G_E V lambda.
ResidualRecord check_kthermo_consistency(const Frame& fr, double tol = 1e-10);

// sup-norm of (u - resynthesized Fourier stack) and the Parseval defect.
ResidualRecord check_parseval(const Frame& fr, const PhaseFunction& u, double tol = 1e-10);

}  // namespace thermoray::phase
