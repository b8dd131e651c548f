// Numerical integration of the thermostat flow on SM: fixed-step RK4 on
//   x' = e^{-rho} cos phi,  y' = e^{-rho} sin phi,
//   phi' = e^{-rho}(-rho_x sin phi + rho_y cos phi) + lambda(x, y, phi),
// exit-time detection on disks, the thermostat exponential map and a
// sampled simplicity certificate.
#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <vector>

#include "thermoray/chart.hpp"

namespace thermoray::flow {

using geom::ChartPtr;
using geom::ExternalField;

// Compiled coordinate evaluators for the flow and the along-orbit scalars.
// The thermostat case derives lambda from <E, iv>; the magnetic diagnostic
// uses a prescribed lambda(x, y).
class FrameEvaluator {
 public:
  FrameEvaluator(const ChartPtr& chart, const ExternalField& field);
  static FrameEvaluator magnetic(const ChartPtr& chart, const expr::Expr& lambda);

  void rhs(const double s[3], double out[3]) const;
  double lambda(double x, double y, double phi) const;
  double vlambda(double x, double y, double phi) const;
  double kthermo(double x, double y) const;
  // d/dt of V(lambda) along the flow = X(V lambda) + lambda * V(V lambda)
  double vlambda_dot(double x, double y, double phi) const;

  const ChartPtr& chart() const { return chart_; }

 private:
  FrameEvaluator() = default;
  ChartPtr chart_;
  expr::Tape rho_, rho_x_, rho_y_;
  expr::Tape e1_, e2_, e1_x_, e1_y_, e2_x_, e2_y_;
  expr::Tape kthermo_;
  bool magnetic_ = false;
  expr::Tape mag_lambda_, mag_lambda_x_, mag_lambda_y_;
};

enum class Termination { Tmax, BoundaryExit, StepFailure };

struct ThermostatOrbit {
  std::vector<double> t, x, y, phi;
  std::vector<double> lambda, vlambda, kthermo, vlambda_dot;
  Termination end = Termination::Tmax;
  double exit_time = -1.0;  // valid when end == BoundaryExit

  std::size_t size() const { return t.size(); }
  void to_csv(std::ostream& os) const;  // t,x,y,phi,lambda,Vlambda,Kthermo
};

struct OrbitOptions {
  double h = 1e-3;
  bool record_scalars = true;
  int sample_stride = 1;  // keep every n-th step (endpoints always kept)
};

ThermostatOrbit integrate_orbit(const FrameEvaluator& fe, double x0, double y0, double phi0,
                                double tmax, const OrbitOptions& opt = {});

ThermostatOrbit integrate_orbit(const ChartPtr& chart, const ExternalField& field, double x0,
                                double y0, double phi0, double tmax,
                                const OrbitOptions& opt = {});

// First boundary-crossing time on a disk chart; throws ConfigError on torus.
// Returns nullopt when the orbit is still inside at t_cap.
std::optional<double> exit_time(const FrameEvaluator& fe, double x, double y, double phi,
                                double t_cap, const OrbitOptions& opt = {});

// Base point of the orbit at time t (thermostat exponential map in the
// direction phi). Throws HypothesisError if the orbit leaves the domain.
std::array<double, 2> thermostat_exp(const FrameEvaluator& fe, double x, double y, double phi,
                                     double t, const OrbitOptions& opt = {});

struct FanSpec {
  int n_boundary = 256;
  int n_angles = 128;
};

// Entry configuration on the inward boundary fan: boundary arc length
// s = R * psi, entry angle theta in (-pi/2, pi/2) measured from the inward
// normal. Returns the SM state (x, y, phi).
std::array<double, 3> fan_entry(const ChartPtr& chart, double s, double theta);

struct SimplicityReport {
  double convexity_margin = 0.0;
  bool all_exit = false;
  int non_exiting = 0;
  bool conjugate_free = false;
  int conjugate_hits = 0;
  int injectivity_violations = 0;
  double max_exit_time = 0.0;
  bool simple = false;  // verdict, certified up to the sampling density
};

SimplicityReport simplicity_check(const ChartPtr& chart, const ExternalField& field,
                                  const FanSpec& fan = {}, const OrbitOptions& opt = {},
                                  double t_cap = -1.0);

// |endpoint(h) - endpoint(h/2)| over a time-tmax orbit, the step-doubling
// global error estimate used to validate the default step.
double step_doubling_error(const FrameEvaluator& fe, double x0, double y0, double phi0,
                           double tmax, double h);

// First vanishing time of the standard (beta = 1) Jacobi solution with
// y(0) = 0, y'(0) = 1 along the orbit; -1 when none before exit/t_cap.
// Directly coded extended integrator, independent of the jacobi module.
double first_conjugate_time_beta1(const FrameEvaluator& fe, double x0, double y0, double phi0,
                                  double t_cap, double h);

}  // namespace thermoray::flow
