#include "thermoray/flow.hpp"

#include <cmath>
#include <ostream>

#include "thermoray/parallel.hpp"
#include "thermoray/surface.hpp"

namespace thermoray::flow {

using expr::Tape;
using geom::ConfigError;
using geom::HypothesisError;

FrameEvaluator::FrameEvaluator(const ChartPtr& chart, const ExternalField& field)
    : chart_(chart),
      rho_(chart->rho()),
      rho_x_(chart->rho_x()),
      rho_y_(chart->rho_y()),
      e1_(field.e1()),
      e2_(field.e2()),
      e1_x_(field.e1_x()),
      e1_y_(field.e1_y()),
      e2_x_(field.e2_x()),
      e2_y_(field.e2_y()),
      kthermo_(geom::thermostat_curvature_expr(*chart, field)) {}

FrameEvaluator FrameEvaluator::magnetic(const ChartPtr& chart, const expr::Expr& lambda) {
  FrameEvaluator fe;
  fe.chart_ = chart;
  fe.rho_ = Tape(chart->rho());
  fe.rho_x_ = Tape(chart->rho_x());
  fe.rho_y_ = Tape(chart->rho_y());
  fe.kthermo_ = Tape(geom::gaussian_curvature_expr(*chart));
  fe.magnetic_ = true;
  fe.mag_lambda_ = Tape(lambda);
  fe.mag_lambda_x_ = Tape(expr::differentiate(lambda, expr::Var::X));
  fe.mag_lambda_y_ = Tape(expr::differentiate(lambda, expr::Var::Y));
  return fe;
}

double FrameEvaluator::lambda(double x, double y, double phi) const {
  if (magnetic_) return mag_lambda_(x, y);
  double er = std::exp(rho_(x, y));
  return er * (-e1_(x, y) * std::sin(phi) + e2_(x, y) * std::cos(phi));
}

double FrameEvaluator::vlambda(double x, double y, double phi) const {
  if (magnetic_) return 0.0;
  double er = std::exp(rho_(x, y));
  return -er * (e1_(x, y) * std::cos(phi) + e2_(x, y) * std::sin(phi));
}

double FrameEvaluator::kthermo(double x, double y) const { return kthermo_(x, y); }

double FrameEvaluator::vlambda_dot(double x, double y, double phi) const {
  if (magnetic_) return 0.0;
  double rx = rho_x_(x, y), ry = rho_y_(x, y);
  double er = std::exp(rho_(x, y));
  double c = std::cos(phi), s = std::sin(phi);
  // d/dx and d/dy of V(lambda) = -e^{rho}(E1 cos + E2 sin)
  double dvx = -er * ((rx * e1_(x, y) + e1_x_(x, y)) * c + (rx * e2_(x, y) + e2_x_(x, y)) * s);
  double dvy = -er * ((ry * e1_(x, y) + e1_y_(x, y)) * c + (ry * e2_(x, y) + e2_y_(x, y)) * s);
  double lam = er * (-e1_(x, y) * s + e2_(x, y) * c);
  double emr = 1.0 / er;
  // X(V lambda) + lambda V(V lambda), with V(V lambda) = -lambda
  return emr * (c * dvx + s * dvy) - lam * (emr * (-rx * s + ry * c) + lam);
}

void FrameEvaluator::rhs(const double st[3], double out[3]) const {
  double x = st[0], y = st[1], phi = st[2];
  double emr = std::exp(-rho_(x, y));
  double c = std::cos(phi), s = std::sin(phi);
  out[0] = emr * c;
  out[1] = emr * s;
  out[2] = emr * (-rho_x_(x, y) * s + rho_y_(x, y) * c) + lambda(x, y, phi);
}

namespace {

inline void rk4_step(const FrameEvaluator& fe, const double in[3], double h, double out[3]) {
  double k1[3], k2[3], k3[3], k4[3], tmp[3];
  fe.rhs(in, k1);
  for (int i = 0; i < 3; ++i) tmp[i] = in[i] + 0.5 * h * k1[i];
  fe.rhs(tmp, k2);
  for (int i = 0; i < 3; ++i) tmp[i] = in[i] + 0.5 * h * k2[i];
  fe.rhs(tmp, k3);
  for (int i = 0; i < 3; ++i) tmp[i] = in[i] + h * k3[i];
  fe.rhs(tmp, k4);
  for (int i = 0; i < 3; ++i) out[i] = in[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

inline double boundary_fn(const ChartPtr& chart, const double st[3]) {
  double R = chart->extent();
  return R * R - (st[0] * st[0] + st[1] * st[1]);
}

}  // namespace

ThermostatOrbit integrate_orbit(const FrameEvaluator& fe, double x0, double y0, double phi0,
                                double tmax, const OrbitOptions& opt) {
  const ChartPtr& chart = fe.chart();
  const bool disk = !chart->is_torus();
  ThermostatOrbit orb;
  double st[3] = {x0, y0, phi0};
  double t = 0.0;
  long step = 0;

  auto record = [&](double tt, const double s[3]) {
    orb.t.push_back(tt);
    orb.x.push_back(s[0]);
    orb.y.push_back(s[1]);
    orb.phi.push_back(s[2]);
    if (opt.record_scalars) {
      orb.lambda.push_back(fe.lambda(s[0], s[1], s[2]));
      orb.vlambda.push_back(fe.vlambda(s[0], s[1], s[2]));
      orb.kthermo.push_back(fe.kthermo(s[0], s[1]));
      orb.vlambda_dot.push_back(fe.vlambda_dot(s[0], s[1], s[2]));
    }
  };
  record(0.0, st);

  while (t < tmax - 1e-15) {
    double h = std::min(opt.h, tmax - t);
    double nxt[3];
    rk4_step(fe, st, h, nxt);
    if (!std::isfinite(nxt[0]) || !std::isfinite(nxt[1]) || !std::isfinite(nxt[2])) {
      orb.end = Termination::StepFailure;
      return orb;
    }
    if (disk && boundary_fn(chart, nxt) < 0.0) {
      // bracket the crossing inside this step: g(s) = boundary after a
      // single RK4 substep of length s from st
      double lo = 0.0, hi = h;
      double cross[3];
      for (int it = 0; it < 100; ++it) {
        double mid = 0.5 * (lo + hi);
        rk4_step(fe, st, mid, cross);
        double g = boundary_fn(chart, cross);
        if (std::abs(g) <= 1e-12 * chart->extent() * chart->extent() || hi - lo < 1e-14) break;
        if (g > 0.0)
          lo = mid;
        else
          hi = mid;
      }
      double s_cross = 0.5 * (lo + hi);
      rk4_step(fe, st, s_cross, cross);
      record(t + s_cross, cross);
      orb.end = Termination::BoundaryExit;
      orb.exit_time = t + s_cross;
      return orb;
    }
    t += h;
    for (int i = 0; i < 3; ++i) st[i] = nxt[i];
    ++step;
    if (step % opt.sample_stride == 0 || t >= tmax - 1e-15) record(t, st);
  }
  orb.end = Termination::Tmax;
  return orb;
}

ThermostatOrbit integrate_orbit(const ChartPtr& chart, const ExternalField& field, double x0,
                                double y0, double phi0, double tmax, const OrbitOptions& opt) {
  FrameEvaluator fe(chart, field);
  return integrate_orbit(fe, x0, y0, phi0, tmax, opt);
}

std::optional<double> exit_time(const FrameEvaluator& fe, double x, double y, double phi,
                                double t_cap, const OrbitOptions& opt) {
  const ChartPtr& chart = fe.chart();
  if (chart->is_torus()) throw ConfigError("exit_time requires a disk chart");
  double st[3] = {x, y, phi};
  double f0 = boundary_fn(chart, st);
  if (f0 < -1e-12 * chart->extent() * chart->extent())
    throw HypothesisError("exit_time: start point outside the disk");
  if (std::abs(f0) <= 1e-12 * chart->extent() * chart->extent()) {
    // on the boundary: leave immediately when moving outward
    double d[3];
    fe.rhs(st, d);
    double fdot = -2.0 * (st[0] * d[0] + st[1] * d[1]);
    if (fdot < 1e-14) {
      // tangent or outward: probe one step; only a strictly entering orbit
      // continues
      double probe[3];
      rk4_step(fe, st, opt.h, probe);
      if (boundary_fn(chart, probe) <= 0.0) return 0.0;
    }
  }
  OrbitOptions o = opt;
  o.record_scalars = false;
  o.sample_stride = 1 << 20;  // keep memory flat; exit detection is per step
  ThermostatOrbit orb = integrate_orbit(fe, x, y, phi, t_cap, o);
  if (orb.end == Termination::BoundaryExit) return orb.exit_time;
  if (orb.end == Termination::StepFailure)
    throw HypothesisError("exit_time: integration failed (expression blow-up)");
  return std::nullopt;
}

std::array<double, 2> thermostat_exp(const FrameEvaluator& fe, double x, double y, double phi,
                                     double t, const OrbitOptions& opt) {
  OrbitOptions o = opt;
  o.record_scalars = false;
  o.sample_stride = 1 << 20;
  ThermostatOrbit orb = integrate_orbit(fe, x, y, phi, t, o);
  if (orb.end == Termination::BoundaryExit)
    throw HypothesisError("thermostat_exp: orbit leaves the domain before t");
  if (orb.end == Termination::StepFailure)
    throw HypothesisError("thermostat_exp: integration failed");
  return {orb.x.back(), orb.y.back()};
}

std::array<double, 3> fan_entry(const ChartPtr& chart, double s, double theta) {
  double R = chart->extent();
  double psi = s / R;
  double px = R * std::cos(psi), py = R * std::sin(psi);
  double phi = psi + M_PI + theta;  // inward normal rotated by theta
  return {px, py, phi};
}


namespace {

// extended RK4 on (x, y, phi, yJ, wJ) with the beta = 1 Jacobi equation
// yJ'' = V(lambda) yJ' - (K_thermo - d/dt V(lambda)) yJ along the orbit
struct Ext5 {
  const FrameEvaluator& fe;
  void rhs(const double s[5], double out[5]) const {
    fe.rhs(s, out);
    double vl = fe.vlambda(s[0], s[1], s[2]);
    double q = fe.kthermo(s[0], s[1]) - fe.vlambda_dot(s[0], s[1], s[2]);
    out[3] = s[4];
    out[4] = vl * s[4] - q * s[3];
  }
  void step(const double in[5], double h, double out[5]) const {
    double k1[5], k2[5], k3[5], k4[5], tmp[5];
    rhs(in, k1);
    for (int i = 0; i < 5; ++i) tmp[i] = in[i] + 0.5 * h * k1[i];
    rhs(tmp, k2);
    for (int i = 0; i < 5; ++i) tmp[i] = in[i] + 0.5 * h * k2[i];
    rhs(tmp, k3);
    for (int i = 0; i < 5; ++i) tmp[i] = in[i] + h * k3[i];
    rhs(tmp, k4);
    for (int i = 0; i < 5; ++i)
      out[i] = in[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
};

}  // namespace

// First sign change of the beta=1 Jacobi solution with y(0)=0, y'(0)=1; -1
// when none occurs before exiting or t_cap. Independent of the jacobi
// module's interpolated route.
double first_conjugate_time_beta1(const FrameEvaluator& fe, double x0, double y0, double phi0,
                                  double t_cap, double h) {
  const ChartPtr& chart = fe.chart();
  const bool disk = !chart->is_torus();
  Ext5 ext{fe};
  double st[5] = {x0, y0, phi0, 0.0, 1.0};
  double t = 0.0;
  double prev_y = 0.0;
  bool departed = false;
  while (t < t_cap) {
    double h_eff = std::min(h, t_cap - t);
    double nxt[5];
    ext.step(st, h_eff, nxt);
    if (!std::isfinite(nxt[3])) return -1.0;
    if (disk && boundary_fn(chart, nxt) < 0.0) return -1.0;
    if (departed && prev_y * nxt[3] < 0.0) {
      // bisect on the substep
      double lo = 0.0, hi = h_eff, cross[5];
      for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (lo + hi);
        ext.step(st, mid, cross);
        if (st[3] * cross[3] <= 0.0)
          hi = mid;
        else
          lo = mid;
        if (hi - lo < 1e-9) break;
      }
      return t + 0.5 * (lo + hi);
    }
    if (!departed && std::abs(nxt[3]) > 1e-8) departed = true;
    prev_y = nxt[3];
    t += h_eff;
    for (int i = 0; i < 5; ++i) st[i] = nxt[i];
  }
  return -1.0;
}

SimplicityReport simplicity_check(const ChartPtr& chart, const ExternalField& field,
                                  const FanSpec& fan, const OrbitOptions& opt, double t_cap) {
  if (chart->is_torus()) throw ConfigError("simplicity_check requires a disk chart");
  SimplicityReport rep;
  auto conv = geom::boundary_convexity(chart, field);
  rep.convexity_margin = conv.margin;

  double max_erho = 0.0;
  for (double v : chart->e2rho().a) max_erho = std::max(max_erho, std::sqrt(v));
  if (t_cap <= 0.0) t_cap = 50.0 * 2.0 * chart->extent() * max_erho;

  FrameEvaluator fe(chart, field);
  const int nb = fan.n_boundary, na = fan.n_angles;
  const std::size_t total = static_cast<std::size_t>(nb) * na;
  std::vector<double> exit_t(total, -1.0);
  std::vector<double> exit_arc(total, 0.0);
  std::vector<double> conj(total, -1.0);

  par::parallel_for(total, [&](std::size_t idx) {
    int a = static_cast<int>(idx % na);
    int b = static_cast<int>(idx / na);
    double s = 2.0 * M_PI * chart->extent() * b / nb;
    double theta = -M_PI / 2.0 + M_PI * (a + 0.5) / na;
    auto e = fan_entry(chart, s, theta);
    OrbitOptions o = opt;
    o.record_scalars = false;
    o.sample_stride = 1 << 20;
    ThermostatOrbit orb = integrate_orbit(fe, e[0], e[1], e[2], t_cap, o);
    if (orb.end == Termination::BoundaryExit) {
      exit_t[idx] = orb.exit_time;
      exit_arc[idx] = std::atan2(orb.y.back(), orb.x.back());
      conj[idx] = first_conjugate_time_beta1(fe, e[0], e[1], e[2], orb.exit_time, opt.h);
    }
  });

  rep.all_exit = true;
  rep.conjugate_free = true;
  for (std::size_t i = 0; i < total; ++i) {
    if (exit_t[i] < 0.0) {
      rep.all_exit = false;
      ++rep.non_exiting;
    } else {
      rep.max_exit_time = std::max(rep.max_exit_time, exit_t[i]);
      if (conj[i] >= 0.0) {
        rep.conjugate_free = false;
        ++rep.conjugate_hits;
      }
    }
  }

  // sampled injectivity proxy: within one base point's fan, two different
  // entry angles reaching (almost) the same exit point flags a failure of
  // the exponential-map diffeomorphism
  double res = 2.0 * chart->extent() / (chart->nx() - 1);
  for (int b = 0; b < nb; ++b) {
    for (int a1 = 0; a1 < na; ++a1) {
      std::size_t i1 = static_cast<std::size_t>(b) * na + a1;
      if (exit_t[i1] < 0.0) continue;
      for (int a2 = a1 + 2; a2 < na; ++a2) {
        std::size_t i2 = static_cast<std::size_t>(b) * na + a2;
        if (exit_t[i2] < 0.0) continue;
        double d = std::abs(exit_arc[i1] - exit_arc[i2]);
        d = std::min(d, 2.0 * M_PI - d) * chart->extent();
        if (d < res) ++rep.injectivity_violations;
      }
    }
  }

  rep.simple = rep.convexity_margin > 0.0 && rep.all_exit && rep.conjugate_free &&
               rep.injectivity_violations == 0;
  return rep;
}

double step_doubling_error(const FrameEvaluator& fe, double x0, double y0, double phi0,
                           double tmax, double h) {
  OrbitOptions a, b;
  a.h = h;
  b.h = 0.5 * h;
  a.record_scalars = b.record_scalars = false;
  a.sample_stride = b.sample_stride = 1 << 20;
  ThermostatOrbit oa = integrate_orbit(fe, x0, y0, phi0, tmax, a);
  ThermostatOrbit ob = integrate_orbit(fe, x0, y0, phi0, tmax, b);
  double dx = oa.x.back() - ob.x.back();
  double dy = oa.y.back() - ob.y.back();
  double dp = oa.phi.back() - ob.phi.back();
  return std::sqrt(dx * dx + dy * dy + dp * dp);
}

void ThermostatOrbit::to_csv(std::ostream& os) const {
  os << "t,x,y,phi,lambda,Vlambda,Kthermo\n";
  char buf[200];
  for (std::size_t i = 0; i < t.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", t[i], x[i], y[i],
                  phi[i], lambda.empty() ? 0.0 : lambda[i], vlambda.empty() ? 0.0 : vlambda[i],
                  kthermo.empty() ? 0.0 : kthermo[i]);
    os << buf;
  }
}

}  // namespace thermoray::flow
