// Thermostat ray transform of symmetric tensors on simple disks: phase
// lifts, the boundary fan transform, potential tensors, transport solutions
// and the numerical s-injectivity kernel test.
#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <optional>

#include "thermoray/flow.hpp"
#include "thermoray/phase.hpp"

namespace thermoray::xray {

using flow::FanSpec;
using flow::OrbitOptions;
using geom::ChartPtr;
using geom::ExternalField;
using phase::PhaseFunction;

// Order-m symmetric tensor by its m+1 independent components; comp[j] is
// the coefficient of the index pattern with j y-indices.
struct SymmetricTensor {
  int order = 0;
  std::vector<expr::Expr> comp;

  SymmetricTensor() = default;
  SymmetricTensor(int m, std::vector<expr::Expr> c);
  static SymmetricTensor function(expr::Expr f) { return SymmetricTensor(0, {std::move(f)}); }
};

// Phase lift: sum_j binom(m, j) comp_j (v^1)^{m-j} (v^2)^j with
// v = e^{-rho}(cos phi, sin phi); Fourier support |k| <= m, k = m (mod 2).
PhaseFunction lift_tensor(const SymmetricTensor& f, const ChartPtr& chart);

// Inverse of the lift on grids: recovers the m+1 component fields from a
// stack with the lift's support pattern.
std::vector<geom::ScalarField> tensor_from_phase(const PhaseFunction& u, int m);

struct RayData {
  int n_boundary = 0, n_angles = 0;
  std::vector<double> s, theta, value;
  std::vector<double> orbit_length;
  void to_csv(std::ostream& os) const;  // s, theta, value
};

// Integrates the lift along every fan orbit (trapezoid on the integrator
// nodes). Throws HypothesisError if an orbit fails to exit before the cap.
RayData ray_transform(const ChartPtr& chart, const ExternalField& field, const PhaseFunction& lift,
                      const FanSpec& fan = {}, const OrbitOptions& opt = {}, double t_cap = -1.0);

// G_E h for h of degree <= m-1 (boundary-vanishing enforced on disks);
// the result has degree <= m and the parity of an m-tensor lift when h is a
// tensor lift.
PhaseFunction potential_tensor(const ChartPtr& chart, const ExternalField& field,
                               const PhaseFunction& h, int m);

struct TransportResult {
  PhaseFunction u;                    // grid stack of u^f
  double residual_sup_interior = 0.0; // sup |G_E u^f - f| on the interior band
  double boundary_sup = 0.0;          // sup |u^f| over the exit fan states
};

// u^f(x,v) = -integral_0^tau f(phi_t(x,v)) dt on the SM grid, with the
// transport residual measured by stencil differentiation on nodes whose
// stencil stays inside radius <= 0.85 R.
TransportResult transport_solution(const ChartPtr& chart, const ExternalField& field,
                                   const PhaseFunction& f, const FanSpec& boundary_fan = {},
                                   const OrbitOptions& opt = {});

struct KernelBases {
  int tensor_degree = 2;     // polynomial degree of plain tensor components
  int potential_degree = 1;  // polynomial degree under the (R^2 - r^2) factor
};

struct KernelReport {
  int m = 0;
  int basis_dim = 0;
  int kernel_dim = 0;
  int potential_dim = 0;
  double principal_angle = 0.0;  // radians, between SVD kernel and potentials
  double gap_ratio = 0.0;        // smallest kept / largest dropped singular value
  double gram_condition = 0.0;
  std::vector<double> singular_values;
};

// Builds the fan data matrix over [potential columns | polynomial tensor
// columns], SVD-detects the numerical kernel and compares it (principal
// angle in the L2 Gram metric) against the potential coordinate subspace.
KernelReport sinjectivity_test(const ChartPtr& chart, const ExternalField& field, int m,
                               const KernelBases& bases = {}, const FanSpec& fan = {},
                               const OrbitOptions& opt = {});

struct RecoveryResult {
  Eigen::VectorXd coeffs;
  double rel_error = -1.0;             // vs ground truth when supplied
  double solenoidal_ratio = -1.0;      // Gram-orthogonal part / phantom scale
  double data_residual = 0.0;
};

// Tikhonov-regularized least squares over the same basis/fan as the kernel
// test. truth (optional) is a coefficient vector in the same basis.
RecoveryResult recover_tensor(const ChartPtr& chart, const ExternalField& field,
                              const Eigen::VectorXd& data, int m, double reg,
                              const KernelBases& bases = {}, const FanSpec& fan = {},
                              const OrbitOptions& opt = {},
                              const std::optional<Eigen::VectorXd>& truth = std::nullopt);

// The shared basis construction (exposed for the CLI and tests): potential
// lifts G_E h_j first, then plain polynomial tensors; returns lifts and the
// potential count.
struct TensorBasis {
  std::vector<PhaseFunction> lifts;
  int potential_dim = 0;
};
TensorBasis build_tensor_basis(const ChartPtr& chart, const ExternalField& field, int m,
                               const KernelBases& bases);

// Fan data matrix of the ray transform over a lift basis.
Eigen::MatrixXd transform_matrix(const ChartPtr& chart, const ExternalField& field,
                                 const std::vector<PhaseFunction>& lifts, const FanSpec& fan,
                                 const OrbitOptions& opt);

// L2(M)-Gram matrix of lifts (polar quadrature).
Eigen::MatrixXd gram_matrix(const std::vector<PhaseFunction>& lifts, const phase::Frame& fr);

}  // namespace thermoray::xray
