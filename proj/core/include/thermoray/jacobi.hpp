// The beta-Jacobi equation along thermostat orbits,
//   y'' - V(lambda) y' + (beta K_thermo - d/dt V(lambda)) y = 0,
// conjugate-point scans, terminator-value estimation, Riccati solutions on
// simple disks and alpha-control certificates.
#pragma once

#include <optional>
#include <vector>

#include "thermoray/flow.hpp"
#include "thermoray/phase.hpp"

namespace thermoray::jacobi {

using flow::FanSpec;
using flow::FrameEvaluator;
using flow::OrbitOptions;
using flow::ThermostatOrbit;
using geom::ChartPtr;
using geom::ExternalField;

struct BetaJacobiSolution {
  double beta = 1.0;
  std::vector<double> t, y, ydot;
  std::vector<double> zeros;  // bracketed sign changes after departure

  std::optional<double> first_zero() const {
    return zeros.empty() ? std::nullopt : std::optional<double>(zeros.front());
  }
};

// Integrates the beta-Jacobi equation over a stored orbit, interpolating the
// along-track coefficients (4-point Lagrange) between the orbit samples.
BetaJacobiSolution beta_jacobi(const ThermostatOrbit& orbit, double beta, double y0, double ydot0);

// Wronskian drift of two solutions: W = y1 y2' - y2 y1' satisfies
// W' = V(lambda) W; returns the sup of |W(t) - W(0) exp(int V(lambda))|
// relative to |W(0)| (consistency diagnostic).
double wronskian_defect(const ThermostatOrbit& orbit, const BetaJacobiSolution& s1,
                        const BetaJacobiSolution& s2);

struct ConjugateRecord {
  double s = 0.0, theta = 0.0;       // entry parameters
  double first_conjugate = -1.0;     // -1 = none
  double exit_time = -1.0;
};

struct ConjugateScan {
  double beta = 1.0;
  std::vector<ConjugateRecord> records;
  int hits = 0;
  bool clean() const { return hits == 0; }
  void to_csv(std::ostream& os) const;  // orbit id, s, theta, first conj or -1
};

ConjugateScan conjugate_scan(const ChartPtr& chart, const ExternalField& field, double beta,
                             const FanSpec& fan = {}, const OrbitOptions& opt = {},
                             double t_cap = -1.0);

struct TerminatorResult {
  double beta_hat = 0.0;
  bool capped = false;
  double tol = 1e-3;
  int fan_size = 0;
  double max_orbit_length = 0.0;
};

// Bisection on [0, beta_max] for the largest conjugate-free beta over the
// fan; capped when beta_max itself is conjugate-free.
TerminatorResult terminator_estimate(const ChartPtr& chart, const ExternalField& field,
                                     double beta_max, double tol = 1e-3, const FanSpec& fan = {},
                                     const OrbitOptions& opt = {});

// r restricted to the SM grid over the disk; NaN marks nodes the
// construction could not reach (outside mask).
struct RiccatiField {
  ChartPtr chart;
  int nphi = 0;
  std::vector<double> values;  // index (i + nx*(j + ny*l))
  double& at(int i, int j, int l);
  double at(int i, int j, int l) const;
  // trilinear interpolation in (x, y, phi)
  double interpolate(double x, double y, double phi) const;
};

struct RiccatiPair {
  RiccatiField rplus, rminus;
  double min_separation = 0.0;  // min over nodes of r+ - r-
  double residual_sup = 0.0;    // Riccati residual along probe orbits
};

// Jacobi-ratio construction on nested enlargements (same closed forms on
// bigger disks): r+ built from the past crossing of the outer enlargement,
// r- from the future crossing of the inner one (time-reversed), both
// evaluated per grid node along the node's own orbit. beta scales the
// curvature term in the Jacobi equation.
RiccatiPair riccati_solutions(const ChartPtr& chart, const ExternalField& field,
                              double inner_scale = 1.1, double outer_scale = 1.2,
                              const OrbitOptions& opt = {}, double beta = 1.0,
                              int n_probe_orbits = 100);

// Pointwise r+/r- at a single SM point (the per-node primitive).
std::optional<double> riccati_plus_at(const FrameEvaluator& outer, double R_mid, double x,
                                      double y, double phi, const OrbitOptions& opt, double beta);
std::optional<double> riccati_minus_at(const FrameEvaluator& inner, double x, double y, double phi,
                                       const OrbitOptions& opt, double beta);

struct AlphaCertificate {
  double alpha = 0.0;
  double beta = 1.0;
  bool premise_ok = false;          // conjugate-free at beta over the fan
  bool kthermo_nonpositive = false; // then alpha = 1 directly
  double nonneg_identity_rel = 0.0; // Riccati-identity quadrature residual
  double min_inequality_margin = 0.0;
  int samples = 0;
};

// Certifies alpha = (beta-1)/beta control: scans for beta-conjugate points,
// verifies the quadratic-form identity with the constructed r (interior-
// supported test functions) and samples the control inequality.
AlphaCertificate alpha_certificate(const ChartPtr& chart, const ExternalField& field, double beta,
                                   const FanSpec& fan = {}, const OrbitOptions& opt = {},
                                   int n_samples = 50, std::uint64_t seed = 1);

}  // namespace thermoray::jacobi
