#include "thermoray/jacobi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "thermoray/parallel.hpp"
#include "thermoray/rng.hpp"

namespace thermoray::jacobi {

using geom::ConfigError;
using geom::HypothesisError;

namespace {

// 4-point Lagrange interpolation of an orbit-sampled coefficient at time t.
struct TrackInterp {
  const std::vector<double>& t;
  const std::vector<double>& v;

  double operator()(double tq) const {
    std::size_t n = t.size();
    if (n == 1) return v[0];
    if (n < 4) {  // linear fallback for very short orbits
      std::size_t i = tq <= t[0] ? 0 : n - 2;
      for (std::size_t k = 0; k + 1 < n; ++k)
        if (tq >= t[k] && tq <= t[k + 1]) i = k;
      double w = (tq - t[i]) / (t[i + 1] - t[i]);
      return (1.0 - w) * v[i] + w * v[i + 1];
    }
    // locate the bracketing interval (uniform except for the last sample)
    double h = t[1] - t[0];
    std::size_t i = h > 0 ? static_cast<std::size_t>(std::floor((tq - t[0]) / h)) : 0;
    if (i + 1 >= n) i = n - 2;
    while (i > 0 && tq < t[i]) --i;
    while (i + 1 < n - 1 && tq > t[i + 1]) ++i;
    std::size_t lo = i >= 1 ? i - 1 : 0;
    if (lo + 3 >= n) lo = n - 4;
    double acc = 0.0;
    for (std::size_t a = lo; a < lo + 4; ++a) {
      double w = 1.0;
      for (std::size_t b = lo; b < lo + 4; ++b)
        if (a != b) w *= (tq - t[b]) / (t[a] - t[b]);
      acc += w * v[a];
    }
    return acc;
  }
};

}  // namespace

BetaJacobiSolution beta_jacobi(const ThermostatOrbit& orbit, double beta, double y0,
                               double ydot0) {
  if (orbit.vlambda.empty() || orbit.kthermo.empty() || orbit.vlambda_dot.empty())
    throw HypothesisError("beta_jacobi needs an orbit with recorded scalars");
  BetaJacobiSolution sol;
  sol.beta = beta;
  const std::size_t n = orbit.size();
  sol.t = orbit.t;
  sol.y.resize(n);
  sol.ydot.resize(n);
  sol.y[0] = y0;
  sol.ydot[0] = ydot0;

  TrackInterp c{orbit.t, orbit.vlambda};
  TrackInterp kk{orbit.t, orbit.kthermo};
  TrackInterp gv{orbit.t, orbit.vlambda_dot};
  auto q = [&](double t) { return beta * kk(t) - gv(t); };

  auto rhs = [&](double t, double y, double w, double& dy, double& dw) {
    dy = w;
    dw = c(t) * w - q(t) * y;
  };

  double y = y0, w = ydot0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    double t0 = orbit.t[i], h = orbit.t[i + 1] - t0;
    double k1y, k1w, k2y, k2w, k3y, k3w, k4y, k4w;
    rhs(t0, y, w, k1y, k1w);
    rhs(t0 + 0.5 * h, y + 0.5 * h * k1y, w + 0.5 * h * k1w, k2y, k2w);
    rhs(t0 + 0.5 * h, y + 0.5 * h * k2y, w + 0.5 * h * k2w, k3y, k3w);
    rhs(t0 + h, y + h * k3y, w + h * k3w, k4y, k4w);
    y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
    w += h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
    sol.y[i + 1] = y;
    sol.ydot[i + 1] = w;
  }

  // zero bracketing with cubic Hermite refinement, skipping the departure
  // from an initial zero
  double scale = 0.0;
  for (double v : sol.y) scale = std::max(scale, std::abs(v));
  bool departed = false;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (!departed) {
      if (std::abs(sol.y[i]) > 1e-9 * std::max(scale, 1e-300)) departed = true;
      else continue;
    }
    double ya = sol.y[i], yb = sol.y[i + 1];
    if (ya == 0.0 || ya * yb >= 0.0) continue;
    double ta = sol.t[i], tb = sol.t[i + 1];
    double da = sol.ydot[i], db = sol.ydot[i + 1];
    double hh = tb - ta;
    auto hermite = [&](double s) {
      double u = (s - ta) / hh;
      double h00 = (1 + 2 * u) * (1 - u) * (1 - u);
      double h10 = u * (1 - u) * (1 - u);
      double h01 = u * u * (3 - 2 * u);
      double h11 = u * u * (u - 1);
      return h00 * ya + h10 * hh * da + h01 * yb + h11 * hh * db;
    };
    double lo = ta, hi = tb;
    for (int it = 0; it < 80 && hi - lo > 1e-9; ++it) {
      double mid = 0.5 * (lo + hi);
      if (hermite(lo) * hermite(mid) <= 0.0)
        hi = mid;
      else
        lo = mid;
    }
    sol.zeros.push_back(0.5 * (lo + hi));
  }
  return sol;
}

double wronskian_defect(const ThermostatOrbit& orbit, const BetaJacobiSolution& s1,
                        const BetaJacobiSolution& s2) {
  const std::size_t n = orbit.size();
  double w0 = s1.y[0] * s2.ydot[0] - s2.y[0] * s1.ydot[0];
  if (w0 == 0.0) throw HypothesisError("wronskian_defect needs independent initial data");
  double integral = 0.0, worst = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    double h = orbit.t[i + 1] - orbit.t[i];
    integral += 0.5 * h * (orbit.vlambda[i] + orbit.vlambda[i + 1]);
    double w = s1.y[i + 1] * s2.ydot[i + 1] - s2.y[i + 1] * s1.ydot[i + 1];
    worst = std::max(worst, std::abs(w - w0 * std::exp(integral)) / std::abs(w0));
  }
  return worst;
}

ConjugateScan conjugate_scan(const ChartPtr& chart, const ExternalField& field, double beta,
                             const FanSpec& fan, const OrbitOptions& opt, double t_cap) {
  if (chart->is_torus()) throw ConfigError("conjugate_scan requires a disk chart");
  FrameEvaluator fe(chart, field);
  if (t_cap <= 0.0) {
    double max_erho = 0.0;
    for (double v : chart->e2rho().a) max_erho = std::max(max_erho, std::sqrt(v));
    t_cap = 50.0 * 2.0 * chart->extent() * max_erho;
  }

  ConjugateScan scan;
  scan.beta = beta;
  const std::size_t total = static_cast<std::size_t>(fan.n_boundary) * fan.n_angles;
  scan.records.resize(total);
  par::parallel_for(total, [&](std::size_t idx) {
    int a = static_cast<int>(idx % fan.n_angles);
    int b = static_cast<int>(idx / fan.n_angles);
    ConjugateRecord rec;
    rec.s = 2.0 * M_PI * chart->extent() * b / fan.n_boundary;
    rec.theta = -M_PI / 2.0 + M_PI * (a + 0.5) / fan.n_angles;
    auto e = flow::fan_entry(chart, rec.s, rec.theta);
    ThermostatOrbit orb = flow::integrate_orbit(fe, e[0], e[1], e[2], t_cap, opt);
    if (orb.end == flow::Termination::BoundaryExit) rec.exit_time = orb.exit_time;
    BetaJacobiSolution sol = beta_jacobi(orb, beta, 0.0, 1.0);
    if (auto z = sol.first_zero()) rec.first_conjugate = *z;
    scan.records[idx] = rec;
  });
  for (const auto& r : scan.records)
    if (r.first_conjugate >= 0.0) ++scan.hits;
  return scan;
}

void ConjugateScan::to_csv(std::ostream& os) const {
  os << "orbit,s,theta,first_conjugate\n";
  char buf[160];
  for (std::size_t i = 0; i < records.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", i, records[i].s, records[i].theta,
                  records[i].first_conjugate);
    os << buf;
  }
}

TerminatorResult terminator_estimate(const ChartPtr& chart, const ExternalField& field,
                                     double beta_max, double tol, const FanSpec& fan,
                                     const OrbitOptions& opt) {
  TerminatorResult out;
  out.tol = tol;
  out.fan_size = fan.n_boundary * fan.n_angles;
  if (beta_max <= 0.0) {
    out.beta_hat = 0.0;
    return out;
  }

  auto clean = [&](double beta, double* max_len) {
    ConjugateScan s = conjugate_scan(chart, field, beta, fan, opt);
    if (max_len)
      for (const auto& r : s.records) *max_len = std::max(*max_len, r.exit_time);
    return s.clean();
  };

  double len = 0.0;
  if (clean(beta_max, &len)) {
    out.beta_hat = beta_max;
    out.capped = true;
    out.max_orbit_length = len;
    return out;
  }
  out.max_orbit_length = len;
  double lo = 0.0, hi = beta_max;
  if (!clean(0.0, nullptr)) {
    out.beta_hat = 0.0;
    return out;
  }
  while (hi - lo > tol) {
    double mid = 0.5 * (lo + hi);
    if (clean(mid, nullptr))
      lo = mid;
    else
      hi = mid;
  }
  out.beta_hat = lo;
  return out;
}

// ---------------------------------------------------------------------------
// Riccati solutions
// ---------------------------------------------------------------------------

double& RiccatiField::at(int i, int j, int l) {
  return values[static_cast<std::size_t>(i) +
                chart->nx() * (static_cast<std::size_t>(j) + chart->ny() * l)];
}

double RiccatiField::at(int i, int j, int l) const {
  return values[static_cast<std::size_t>(i) +
                chart->nx() * (static_cast<std::size_t>(j) + chart->ny() * l)];
}

double RiccatiField::interpolate(double x, double y, double phi) const {
  const auto& c = *chart;
  double hx = 2.0 * c.extent() / (c.nx() - 1);
  double hy = 2.0 * c.extent() / (c.ny() - 1);
  double fx = (x + c.extent()) / hx;
  double fy = (y + c.extent()) / hy;
  phi = std::fmod(phi, 2.0 * M_PI);
  if (phi < 0) phi += 2.0 * M_PI;
  double fp = phi / (2.0 * M_PI) * nphi;
  int i0 = std::clamp(static_cast<int>(std::floor(fx)), 0, c.nx() - 2);
  int j0 = std::clamp(static_cast<int>(std::floor(fy)), 0, c.ny() - 2);
  int l0 = static_cast<int>(std::floor(fp)) % nphi;
  double wx = fx - i0, wy = fy - j0, wp = fp - std::floor(fp);
  double acc = 0.0;
  for (int di = 0; di < 2; ++di)
    for (int dj = 0; dj < 2; ++dj)
      for (int dl = 0; dl < 2; ++dl) {
        double v = at(i0 + di, j0 + dj, (l0 + dl) % nphi);
        double w = (di ? wx : 1 - wx) * (dj ? wy : 1 - wy) * (dl ? wp : 1 - wp);
        acc += w * v;
      }
  return acc;
}

namespace {

// extended state (x, y, phi, yJ, wJ) with the beta-Jacobi equation
struct ExtBeta {
  const FrameEvaluator& fe;
  double beta;
  void rhs(const double s[5], double out[5]) const {
    fe.rhs(s, out);
    double vl = fe.vlambda(s[0], s[1], s[2]);
    double q = beta * fe.kthermo(s[0], s[1]) - fe.vlambda_dot(s[0], s[1], s[2]);
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

// integrate the plain orbit until |pos| crosses radius, in direction
// sign = +1 (forward) or -1 (backward). Returns elapsed |time| and the
// crossing state, or nullopt if the cap is exceeded.
std::optional<std::pair<double, std::array<double, 3>>> run_to_radius(
    const FrameEvaluator& fe, double x, double y, double phi, double radius, double h_signed,
    double t_cap) {
  double st[3] = {x, y, phi};
  double t = 0.0;
  auto f = [&](const double s[3]) { return radius * radius - (s[0] * s[0] + s[1] * s[1]); };
  if (f(st) <= 0.0) return std::pair{0.0, std::array<double, 3>{x, y, phi}};
  auto rk = [&](const double in[3], double h, double out[3]) {
    double k1[3], k2[3], k3[3], k4[3], tmp[3];
    fe.rhs(in, k1);
    for (int i = 0; i < 3; ++i) tmp[i] = in[i] + 0.5 * h * k1[i];
    fe.rhs(tmp, k2);
    for (int i = 0; i < 3; ++i) tmp[i] = in[i] + 0.5 * h * k2[i];
    fe.rhs(tmp, k3);
    for (int i = 0; i < 3; ++i) tmp[i] = in[i] + h * k3[i];
    fe.rhs(tmp, k4);
    for (int i = 0; i < 3; ++i)
      out[i] = in[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  };
  while (std::abs(t) < t_cap) {
    double nxt[3];
    rk(st, h_signed, nxt);
    if (!std::isfinite(nxt[0]) || !std::isfinite(nxt[1]) || !std::isfinite(nxt[2]))
      return std::nullopt;
    if (f(nxt) < 0.0) {
      double lo = 0.0, hi = std::abs(h_signed), cross[3];
      double sgn = h_signed >= 0 ? 1.0 : -1.0;
      for (int it = 0; it < 90; ++it) {
        double mid = 0.5 * (lo + hi);
        rk(st, sgn * mid, cross);
        double g = f(cross);
        if (std::abs(g) < 1e-13 * radius * radius || hi - lo < 1e-14) break;
        if (g > 0.0)
          lo = mid;
        else
          hi = mid;
      }
      double s_cross = 0.5 * (lo + hi);
      rk(st, sgn * s_cross, cross);
      return std::pair{std::abs(t) + s_cross, std::array<double, 3>{cross[0], cross[1], cross[2]}};
    }
    t += h_signed;
    for (int i = 0; i < 3; ++i) st[i] = nxt[i];
  }
  return std::nullopt;
}

// extended run over a fixed duration (h_signed sets the direction)
void run_extended(const ExtBeta& ext, std::array<double, 3> start, double duration,
                  double h_signed, double out[5]) {
  double st[5] = {start[0], start[1], start[2], 0.0, 1.0};
  double remaining = duration;
  while (remaining > 1e-15) {
    double h = std::min(std::abs(h_signed), remaining);
    double nxt[5];
    ext.step(st, h_signed >= 0 ? h : -h, nxt);
    for (int i = 0; i < 5; ++i) st[i] = nxt[i];
    remaining -= h;
  }
  for (int i = 0; i < 5; ++i) out[i] = st[i];
}

}  // namespace

std::optional<double> riccati_plus_at(const FrameEvaluator& outer, double R_outer, double x,
                                      double y, double phi, const OrbitOptions& opt, double beta) {
  double cap = 60.0 * R_outer;
  auto entry = run_to_radius(outer, x, y, phi, R_outer, -opt.h, cap);
  if (!entry) return std::nullopt;
  ExtBeta ext{outer, beta};
  double st[5];
  run_extended(ext, entry->second, entry->first, opt.h, st);
  if (st[3] <= 0.0) return std::nullopt;  // conjugate point inside: not simple
  return st[4] / st[3];
}

std::optional<double> riccati_minus_at(const FrameEvaluator& inner, double x, double y, double phi,
                                       const OrbitOptions& opt, double beta) {
  double R_inner = inner.chart()->extent();
  double cap = 60.0 * R_inner;
  auto exit = run_to_radius(inner, x, y, phi, R_inner, opt.h, cap);
  if (!exit) return std::nullopt;
  ExtBeta ext{inner, beta};
  double st[5];
  run_extended(ext, exit->second, exit->first, -opt.h, st);
  if (st[3] >= 0.0) return std::nullopt;
  return st[4] / st[3];
}

RiccatiPair riccati_solutions(const ChartPtr& chart, const ExternalField& field,
                              double inner_scale, double outer_scale, const OrbitOptions& opt,
                              double beta, int n_probe_orbits) {
  if (chart->is_torus()) throw ConfigError("riccati_solutions requires a disk chart");
  const double R = chart->extent();
  auto outer_chart = std::make_shared<geom::IsothermalChart>(
      geom::DomainKind::Disk, outer_scale * R, chart->rho(), chart->nx(), chart->ny(),
      chart->nphi());
  auto inner_chart = std::make_shared<geom::IsothermalChart>(
      geom::DomainKind::Disk, inner_scale * R, chart->rho(), chart->nx(), chart->ny(),
      chart->nphi());
  FrameEvaluator fe_outer(outer_chart, field);
  FrameEvaluator fe_inner(inner_chart, field);

  RiccatiPair pair;
  const int nphi = chart->nphi();
  pair.rplus.chart = chart;
  pair.rplus.nphi = nphi;
  pair.rplus.values.assign(static_cast<std::size_t>(chart->nx()) * chart->ny() * nphi,
                           std::nan(""));
  pair.rminus = pair.rplus;

  struct Job {
    int i, j, l;
  };
  std::vector<Job> jobs;
  for (int j = 0; j < chart->ny(); ++j)
    for (int i = 0; i < chart->nx(); ++i) {
      if (!chart->node_inside(i, j)) continue;
      for (int l = 0; l < nphi; ++l) jobs.push_back({i, j, l});
    }

  std::vector<int> failures(jobs.size(), 0);
  par::parallel_for(jobs.size(), [&](std::size_t n) {
    const Job& jb = jobs[n];
    double x = chart->x_of(jb.i), y = chart->y_of(jb.j);
    double phi = 2.0 * M_PI * jb.l / nphi;
    auto rp = riccati_plus_at(fe_outer, outer_scale * R, x, y, phi, opt, beta);
    auto rm = riccati_minus_at(fe_inner, x, y, phi, opt, beta);
    if (!rp || !rm) {
      failures[n] = 1;
      return;
    }
    pair.rplus.at(jb.i, jb.j, jb.l) = *rp;
    pair.rminus.at(jb.i, jb.j, jb.l) = *rm;
  });
  int nfail = 0;
  for (int f : failures) nfail += f;
  if (nfail > 0)
    throw HypothesisError("riccati_solutions: " + std::to_string(nfail) +
                          " nodes failed (enlargement not simple or conjugate point hit)");

  double sep = std::numeric_limits<double>::infinity();
  for (const Job& jb : jobs)
    sep = std::min(sep, pair.rplus.at(jb.i, jb.j, jb.l) - pair.rminus.at(jb.i, jb.j, jb.l));
  pair.min_separation = sep;

  // Riccati residual along probe orbits: central differencing of the
  // directly constructed r along phi_t (independent of the field grid).
  FrameEvaluator fe(chart, field);
  double worst = 0.0;
  std::vector<double> worsts(static_cast<std::size_t>(n_probe_orbits), 0.0);
  par::parallel_for(static_cast<std::size_t>(n_probe_orbits), [&](std::size_t p) {
    const double golden = 2.399963229728653;
    double rad = 0.55 * R * std::sqrt((p + 0.5) / n_probe_orbits);
    double ang = golden * static_cast<double>(p);
    double x0 = rad * std::cos(ang), y0 = rad * std::sin(ang);
    double phi0 = golden * static_cast<double>(p + 7);
    auto exit = run_to_radius(fe, x0, y0, phi0, R, opt.h, 60.0 * R);
    if (!exit) return;
    double T = exit->first;
    int samples = 8;
    double delta = 12.0 * opt.h;
    double w = 0.0;
    for (int s = 1; s < samples; ++s) {
      double tc = T * s / samples;
      if (tc - delta <= 0.0 || tc + delta >= T) continue;
      // states at tc - delta, tc, tc + delta
      double st[5];
      ExtBeta ext{fe, beta};
      auto state_at = [&](double tt, double out[5]) {
        run_extended(ext, {x0, y0, phi0}, tt, opt.h, out);
      };
      double sm[5], sc[5], sp[5];
      state_at(tc - delta, sm);
      state_at(tc, sc);
      state_at(tc + delta, sp);
      auto rp_of = [&](const double s5[5]) {
        return riccati_plus_at(fe_outer, outer_scale * R, s5[0], s5[1], s5[2], opt, beta);
      };
      auto a = rp_of(sm), b = rp_of(sc), c = rp_of(sp);
      if (!a || !b || !c) continue;
      double drdt = (*c - *a) / (2.0 * delta);
      double vl = fe.vlambda(sc[0], sc[1], sc[2]);
      double q = beta * fe.kthermo(sc[0], sc[1]) - fe.vlambda_dot(sc[0], sc[1], sc[2]);
      double resid = drdt + (*b) * (*b) - vl * (*b) + q;
      w = std::max(w, std::abs(resid));
    }
    worsts[p] = w;
  });
  for (double w : worsts) worst = std::max(worst, w);
  pair.residual_sup = worst;
  return pair;
}

// ---------------------------------------------------------------------------
// Alpha certificate
// ---------------------------------------------------------------------------

AlphaCertificate alpha_certificate(const ChartPtr& chart, const ExternalField& field, double beta,
                                   const FanSpec& fan, const OrbitOptions& opt, int n_samples,
                                   std::uint64_t seed) {
  if (beta < 1.0) throw HypothesisError("alpha_certificate needs beta >= 1");
  AlphaCertificate cert;
  cert.beta = beta;

  geom::ScalarField kt = geom::thermostat_curvature(chart, field);
  double kmax = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < chart->ny(); ++j)
    for (int i = 0; i < chart->nx(); ++i)
      if (chart->node_inside(i, j)) kmax = std::max(kmax, kt.values.at(i, j));
  cert.kthermo_nonpositive = kmax <= 1e-12;

  ConjugateScan scan = conjugate_scan(chart, field, beta, fan, opt);
  cert.premise_ok = scan.clean();
  if (!cert.premise_ok)
    throw HypothesisError("alpha_certificate: beta-conjugate points found; premise fails");
  cert.alpha = cert.kthermo_nonpositive ? 1.0 : (beta - 1.0) / beta;

  // quadratic-form identity with the constructed Riccati solution (beta = 1)
  RiccatiPair rr = riccati_solutions(chart, field, 1.1, 1.2, opt, 1.0, 24);

  phase::Frame fr(chart, field);
  rng::Rng rng(seed);
  const auto& c = *chart;
  const int nphi = c.nphi();

  double worst_identity = 0.0;
  double min_margin = std::numeric_limits<double>::infinity();
  int n_identity = std::min(n_samples, 5);  // identity quadrature is the slow part
  for (int s = 0; s < n_samples; ++s) {
    phase::PhaseFunction u = rng::random_interior_supported(rng, chart, 2, 2, 1.0, 0.8);
    phase::PhaseFunction geu = phase::apply(phase::FrameOp::Generator, u, fr);
    double nge = phase::norm_sq(geu, fr);
    double ku = phase::inner_product(phase::mult_scalar(u, fr.kthermo()), u, fr).real();
    double lhs = nge - ku;
    min_margin = std::min(min_margin, (lhs - cert.alpha * nge) / std::max(nge, 1e-300));

    if (s < n_identity) {
      // || G_E u - r u + V(lambda) u ||^2 over the SM grid with r+
      phase::PhaseFunction vlu = phase::mult_vlambda(u, fr);
      double rhs = 0.0;
      for (int j = 0; j < c.ny(); ++j)
        for (int i = 0; i < c.nx(); ++i) {
          if (!c.node_inside(i, j)) continue;
          double wq = c.quad_weight(i, j) * c.e2rho().at(i, j) * (2.0 * M_PI / nphi);
          for (int l = 0; l < nphi; ++l) {
            double phi = 2.0 * M_PI * l / nphi;
            double r = rr.rplus.at(i, j, l);
            if (std::isnan(r)) continue;
            phase::cplx val = geu.value_at(i, j, phi) - r * u.value_at(i, j, phi) +
                              vlu.value_at(i, j, phi);
            rhs += wq * std::norm(val);
          }
        }
      double scale = std::max(std::abs(lhs), std::abs(rhs));
      worst_identity = std::max(worst_identity, scale > 0 ? std::abs(lhs - rhs) / scale : 0.0);
    }
  }
  cert.nonneg_identity_rel = worst_identity;
  cert.min_inequality_margin = min_margin;
  cert.samples = n_samples;
  return cert;
}

}  // namespace thermoray::jacobi
