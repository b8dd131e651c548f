#include "thermoray/xray.hpp"

#include <cmath>
#include <map>
#include <ostream>

#include "thermoray/parallel.hpp"

namespace thermoray::xray {

using geom::ConfigError;
using geom::HypothesisError;
using grid::cplx;
using phase::ComplexExpr;

namespace {

double binom(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Fourier modes of cos^a(phi) sin^b(phi)
std::map<int, cplx> trig_power_modes(int a, int b) {
  std::map<int, cplx> out;
  cplx pa = std::pow(cplx(0.5, 0.0), a);
  cplx pb = std::pow(cplx(0.0, -0.5), b);
  for (int p = 0; p <= a; ++p) {
    for (int q = 0; q <= b; ++q) {
      double sign = ((b - q) % 2 == 0) ? 1.0 : -1.0;
      cplx coef = pa * pb * binom(a, p) * binom(b, q) * sign;
      out[(2 * p - a) + (2 * q - b)] += coef;
    }
  }
  return out;
}

// Per-mode compiled evaluator of a symbolic stack.
struct LiftTapes {
  struct ModeTape {
    int k;
    expr::Tape re, im;
  };
  std::vector<ModeTape> modes;

  explicit LiftTapes(const PhaseFunction& u) {
    for (int k : u.support()) {
      if (!u.mode_is_symbolic(k))
        throw HypothesisError("ray quadrature needs closed-form lift coefficients");
      modes.push_back({k, expr::Tape(u.mode_expr(k).re), expr::Tape(u.mode_expr(k).im)});
    }
  }

  double operator()(double x, double y, double phi) const {
    cplx v = 0.0;
    for (const auto& m : modes)
      v += cplx(m.re(x, y), m.im(x, y)) * std::polar(1.0, m.k * phi);
    return v.real();
  }
};

double default_cap(const ChartPtr& chart) {
  double max_erho = 0.0;
  for (double v : chart->e2rho().a) max_erho = std::max(max_erho, std::sqrt(v));
  return 50.0 * 2.0 * chart->extent() * max_erho;
}

}  // namespace

SymmetricTensor::SymmetricTensor(int m, std::vector<expr::Expr> c) : order(m), comp(std::move(c)) {
  if (order < 0 || static_cast<int>(comp.size()) != order + 1)
    throw ConfigError("symmetric tensor of order m needs exactly m+1 components");
}

PhaseFunction lift_tensor(const SymmetricTensor& f, const ChartPtr& chart) {
  const int m = f.order;
  PhaseFunction u(chart, chart->kmax());
  if (m > chart->kmax()) throw ConfigError("tensor order exceeds the vertical bandwidth");
  expr::Expr emrho =
      m == 0 ? expr::constant(1.0)
             : call(expr::Fn::Exp, expr::constant(static_cast<double>(-m)) * chart->rho());
  std::map<int, ComplexExpr> acc;
  for (int j = 0; j <= m; ++j) {
    auto modes = trig_power_modes(m - j, j);
    expr::Expr base = f.comp[j] * expr::constant(binom(m, j)) * emrho;
    for (const auto& [k, w] : modes) {
      ComplexExpr term = ComplexExpr::real(base) * ComplexExpr::constant(w);
      auto it = acc.find(k);
      if (it == acc.end())
        acc.emplace(k, term);
      else
        it->second = it->second + term;
    }
  }
  for (auto& [k, c] : acc) u.set_mode(k, c);
  return u;
}

std::vector<geom::ScalarField> tensor_from_phase(const PhaseFunction& u, int m) {
  const ChartPtr& chart = u.chart();
  // W maps component values to mode values at a point with rho = 0; the
  // conformal factor is peeled off separately.
  std::vector<int> ks;
  for (int k = -m; k <= m; k += 2) ks.push_back(k);
  Eigen::MatrixXcd W(ks.size(), m + 1);
  W.setZero();
  for (int j = 0; j <= m; ++j) {
    auto modes = trig_power_modes(m - j, j);
    for (std::size_t r = 0; r < ks.size(); ++r) {
      auto it = modes.find(ks[r]);
      if (it != modes.end()) W(r, j) = it->second * binom(m, j);
    }
  }
  Eigen::MatrixXcd Winv = W.fullPivLu().solve(Eigen::MatrixXcd::Identity(m + 1, m + 1));

  std::vector<geom::ScalarField> out(m + 1);
  for (int j = 0; j <= m; ++j) out[j] = {chart, grid::RGrid(chart->nx(), chart->ny(), 0.0)};
  expr::Tape trho(chart->rho());
  for (int jj = 0; jj < chart->ny(); ++jj)
    for (int ii = 0; ii < chart->nx(); ++ii) {
      if (!chart->node_inside(ii, jj)) continue;
      double emr = std::exp(static_cast<double>(m) * trho(chart->x_of(ii), chart->y_of(jj)));
      Eigen::VectorXcd rhs(ks.size());
      for (std::size_t r = 0; r < ks.size(); ++r) {
        int k = ks[r];
        rhs(r) = u.has_mode(k) ? u.mode_samples(k).at(ii, jj) * emr : cplx(0.0);
      }
      Eigen::VectorXcd c = Winv * rhs;
      for (int j = 0; j <= m; ++j) out[j].values.at(ii, jj) = c(j).real();
    }
  return out;
}

RayData ray_transform(const ChartPtr& chart, const ExternalField& field, const PhaseFunction& lift,
                      const FanSpec& fan, const OrbitOptions& opt, double t_cap) {
  if (chart->is_torus()) throw ConfigError("ray_transform requires a disk chart");
  if (t_cap <= 0.0) t_cap = default_cap(chart);
  flow::FrameEvaluator fe(chart, field);
  LiftTapes tapes(lift);

  RayData data;
  data.n_boundary = fan.n_boundary;
  data.n_angles = fan.n_angles;
  const std::size_t total = static_cast<std::size_t>(fan.n_boundary) * fan.n_angles;
  data.s.resize(total);
  data.theta.resize(total);
  data.value.resize(total);
  data.orbit_length.resize(total);
  std::vector<int> failed(total, 0);

  par::parallel_for(total, [&](std::size_t idx) {
    int a = static_cast<int>(idx % fan.n_angles);
    int b = static_cast<int>(idx / fan.n_angles);
    double s = 2.0 * M_PI * chart->extent() * b / fan.n_boundary;
    double theta = -M_PI / 2.0 + M_PI * (a + 0.5) / fan.n_angles;
    data.s[idx] = s;
    data.theta[idx] = theta;
    auto e = flow::fan_entry(chart, s, theta);
    flow::OrbitOptions o = opt;
    o.record_scalars = false;
    flow::ThermostatOrbit orb = flow::integrate_orbit(fe, e[0], e[1], e[2], t_cap, o);
    if (orb.end != flow::Termination::BoundaryExit) {
      failed[idx] = 1;
      return;
    }
    double acc = 0.0;
    double prev = tapes(orb.x[0], orb.y[0], orb.phi[0]);
    for (std::size_t i = 1; i < orb.size(); ++i) {
      double cur = tapes(orb.x[i], orb.y[i], orb.phi[i]);
      acc += 0.5 * (prev + cur) * (orb.t[i] - orb.t[i - 1]);
      prev = cur;
    }
    data.value[idx] = acc;
    data.orbit_length[idx] = orb.exit_time;
  });
  int nf = 0;
  for (int f : failed) nf += f;
  if (nf > 0)
    throw HypothesisError("ray_transform: " + std::to_string(nf) +
                          " fan orbits did not exit (configuration not simple?)");
  return data;
}

void RayData::to_csv(std::ostream& os) const {
  os << "s,theta,value\n";
  char buf[120];
  for (std::size_t i = 0; i < value.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", s[i], theta[i], value[i]);
    os << buf;
  }
}

PhaseFunction potential_tensor(const ChartPtr& chart, const ExternalField& field,
                               const PhaseFunction& h, int m) {
  if (!h.supported_within(m - 1))
    throw HypothesisError("potential_tensor: h must have degree <= m-1");
  if (!chart->is_torus()) {
    if (!h.boundary_vanishing())
      throw HypothesisError("potential_tensor: h must be flagged boundary-vanishing on disks");
  }
  phase::Frame fr(chart, field);
  PhaseFunction out = phase::apply(phase::FrameOp::Generator, h, fr);
  out.set_boundary_vanishing(false);
  return out;
}

TransportResult transport_solution(const ChartPtr& chart, const ExternalField& field,
                                   const PhaseFunction& f, const FanSpec& boundary_fan,
                                   const OrbitOptions& opt) {
  if (chart->is_torus()) throw ConfigError("transport_solution requires a disk chart");
  const double t_cap = default_cap(chart);
  flow::FrameEvaluator fe(chart, field);
  LiftTapes tapes(f);
  const int nx = chart->nx(), ny = chart->ny(), nphi = chart->nphi();
  const int kmax = chart->kmax();

  auto integrate_from = [&](double x, double y, double phi) {
    flow::OrbitOptions o = opt;
    o.record_scalars = false;
    flow::ThermostatOrbit orb = flow::integrate_orbit(fe, x, y, phi, t_cap, o);
    if (orb.end != flow::Termination::BoundaryExit)
      throw HypothesisError("transport_solution: orbit did not exit");
    double acc = 0.0;
    double prev = tapes(orb.x[0], orb.y[0], orb.phi[0]);
    for (std::size_t i = 1; i < orb.size(); ++i) {
      double cur = tapes(orb.x[i], orb.y[i], orb.phi[i]);
      acc += 0.5 * (prev + cur) * (orb.t[i] - orb.t[i - 1]);
      prev = cur;
    }
    return -acc;
  };

  // u^f on the SM grid, stored as phi samples then projected to modes
  std::vector<std::vector<cplx>> samples(static_cast<std::size_t>(nx) * ny);
  std::vector<std::size_t> nodes;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      if (chart->node_inside(i, j)) nodes.push_back(static_cast<std::size_t>(j) * nx + i);

  par::parallel_for(nodes.size(), [&](std::size_t n) {
    std::size_t id = nodes[n];
    int i = static_cast<int>(id % nx), j = static_cast<int>(id / nx);
    std::vector<cplx> vals(static_cast<std::size_t>(nphi));
    for (int l = 0; l < nphi; ++l)
      vals[l] = integrate_from(chart->x_of(i), chart->y_of(j), 2.0 * M_PI * l / nphi);
    samples[id] = std::move(vals);
  });

  TransportResult out;
  out.u = PhaseFunction(chart, kmax);
  for (int k = -kmax; k <= kmax; ++k) {
    grid::CGrid g(nx, ny);
    for (std::size_t id : nodes) {
      int i = static_cast<int>(id % nx), j = static_cast<int>(id / nx);
      cplx acc = 0.0;
      for (int l = 0; l < nphi; ++l)
        acc += samples[id][l] * std::polar(1.0, -2.0 * M_PI * k * l / nphi);
      g.at(i, j) = acc / static_cast<double>(nphi);
    }
    out.u.set_mode_grid(k, g);
  }

  // transport residual G_E u^f - f on the interior band
  phase::Frame fr(chart, field);
  PhaseFunction geu = phase::apply(phase::FrameOp::Generator, out.u, fr);
  double band2 = 0.85 * 0.85 * chart->extent() * chart->extent();
  auto stencil_ok = [&](int i, int j) {
    for (int d = -2; d <= 2; ++d) {
      if (i + d < 0 || i + d >= nx || j + d < 0 || j + d >= ny) return false;
      if (!chart->node_inside(i + d, j) || !chart->node_inside(i, j + d)) return false;
    }
    return true;
  };
  double res = 0.0;
  for (std::size_t id : nodes) {
    int i = static_cast<int>(id % nx), j = static_cast<int>(id / nx);
    double x = chart->x_of(i), y = chart->y_of(j);
    if (x * x + y * y > band2 || !stencil_ok(i, j)) continue;
    for (int l = 0; l < nphi; ++l) {
      double phi = 2.0 * M_PI * l / nphi;
      cplx g = geu.value_at(i, j, phi);
      double fv = tapes(x, y, phi);
      res = std::max(res, std::abs(g - cplx(fv)));
    }
  }
  out.residual_sup_interior = res;

  // boundary trace over the inward fan
  double bs = 0.0;
  for (int b = 0; b < boundary_fan.n_boundary; ++b)
    for (int a = 0; a < boundary_fan.n_angles; ++a) {
      double s = 2.0 * M_PI * chart->extent() * b / boundary_fan.n_boundary;
      double theta = -M_PI / 2.0 + M_PI * (a + 0.5) / boundary_fan.n_angles;
      auto e = flow::fan_entry(chart, s, theta);
      bs = std::max(bs, std::abs(integrate_from(e[0], e[1], e[2])));
    }
  out.boundary_sup = bs;
  return out;
}

// ---------------------------------------------------------------------------
// Kernel test and recovery
// ---------------------------------------------------------------------------

TensorBasis build_tensor_basis(const ChartPtr& chart, const ExternalField& field, int m,
                               const KernelBases& bases) {
  TensorBasis out;
  const double R = chart->extent();
  expr::Expr bump = expr::constant(R * R) - (expr::var_x() * expr::var_x() +
                                             expr::var_y() * expr::var_y());
  auto monomial = [&](int a, int b) {
    expr::Expr t = expr::constant(1.0);
    for (int i = 0; i < a; ++i) t = t * expr::var_x();
    for (int i = 0; i < b; ++i) t = t * expr::var_y();
    return t;
  };

  if (m >= 1) {
    for (int jc = 0; jc < m; ++jc) {
      for (int a = 0; a <= bases.potential_degree; ++a) {
        for (int b = 0; a + b <= bases.potential_degree; ++b) {
          std::vector<expr::Expr> comps(static_cast<std::size_t>(m), expr::constant(0.0));
          comps[jc] = bump * monomial(a, b);
          SymmetricTensor h(m - 1, comps);
          PhaseFunction hl = lift_tensor(h, chart);
          hl.set_boundary_vanishing(true);
          out.lifts.push_back(potential_tensor(chart, field, hl, m));
        }
      }
    }
  }
  out.potential_dim = static_cast<int>(out.lifts.size());

  for (int jc = 0; jc <= m; ++jc) {
    for (int a = 0; a <= bases.tensor_degree; ++a) {
      for (int b = 0; a + b <= bases.tensor_degree; ++b) {
        std::vector<expr::Expr> comps(static_cast<std::size_t>(m + 1), expr::constant(0.0));
        comps[jc] = monomial(a, b);
        out.lifts.push_back(lift_tensor(SymmetricTensor(m, comps), chart));
      }
    }
  }
  return out;
}

Eigen::MatrixXd transform_matrix(const ChartPtr& chart, const ExternalField& field,
                                 const std::vector<PhaseFunction>& lifts, const FanSpec& fan,
                                 const OrbitOptions& opt) {
  const double t_cap = default_cap(chart);
  flow::FrameEvaluator fe(chart, field);
  std::vector<LiftTapes> tapes;
  tapes.reserve(lifts.size());
  for (const auto& u : lifts) tapes.emplace_back(u);

  const std::size_t rows = static_cast<std::size_t>(fan.n_boundary) * fan.n_angles;
  Eigen::MatrixXd A(rows, lifts.size());
  std::vector<int> failed(rows, 0);
  par::parallel_for(rows, [&](std::size_t idx) {
    int a = static_cast<int>(idx % fan.n_angles);
    int b = static_cast<int>(idx / fan.n_angles);
    double s = 2.0 * M_PI * chart->extent() * b / fan.n_boundary;
    double theta = -M_PI / 2.0 + M_PI * (a + 0.5) / fan.n_angles;
    auto e = flow::fan_entry(chart, s, theta);
    flow::OrbitOptions o = opt;
    o.record_scalars = false;
    flow::ThermostatOrbit orb = flow::integrate_orbit(fe, e[0], e[1], e[2], t_cap, o);
    if (orb.end != flow::Termination::BoundaryExit) {
      failed[idx] = 1;
      return;
    }
    for (std::size_t c = 0; c < tapes.size(); ++c) {
      double acc = 0.0;
      double prev = tapes[c](orb.x[0], orb.y[0], orb.phi[0]);
      for (std::size_t i = 1; i < orb.size(); ++i) {
        double cur = tapes[c](orb.x[i], orb.y[i], orb.phi[i]);
        acc += 0.5 * (prev + cur) * (orb.t[i] - orb.t[i - 1]);
        prev = cur;
      }
      A(idx, c) = acc;
    }
  });
  int nf = 0;
  for (int f : failed) nf += f;
  if (nf > 0)
    throw HypothesisError("transform_matrix: " + std::to_string(nf) + " fan orbits did not exit");
  return A;
}

Eigen::MatrixXd gram_matrix(const std::vector<PhaseFunction>& lifts, const phase::Frame& fr) {
  const int n = static_cast<int>(lifts.size());
  Eigen::MatrixXd G(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      double v = phase::inner_product_polar(lifts[i], lifts[j], fr).real();
      G(i, j) = v;
      G(j, i) = v;
    }
  return G;
}

KernelReport sinjectivity_test(const ChartPtr& chart, const ExternalField& field, int m,
                               const KernelBases& bases, const FanSpec& fan,
                               const OrbitOptions& opt) {
  TensorBasis basis = build_tensor_basis(chart, field, m, bases);
  phase::Frame fr(chart, field);
  Eigen::MatrixXd G = gram_matrix(basis.lifts, fr);
  const int n = static_cast<int>(basis.lifts.size());

  Eigen::VectorXd scale(n);
  for (int i = 0; i < n; ++i) scale(i) = 1.0 / std::sqrt(std::max(G(i, i), 1e-300));
  Eigen::MatrixXd Gn = scale.asDiagonal() * G * scale.asDiagonal();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Gn);
  double gmin = es.eigenvalues().minCoeff(), gmaxv = es.eigenvalues().maxCoeff();
  double cond = gmaxv / std::max(gmin, 1e-300);
  if (cond > 1e12)
    throw HypothesisError("sinjectivity_test: tensor basis is numerically dependent (Gram cond " +
                          std::to_string(cond) + ")");

  Eigen::MatrixXd A = transform_matrix(chart, field, basis.lifts, fan, opt);
  Eigen::MatrixXd An = A * scale.asDiagonal();

  Eigen::BDCSVD<Eigen::MatrixXd> svd(An, Eigen::ComputeThinV);
  Eigen::VectorXd sv = svd.singularValues();
  double smax = sv(0);
  int kdim = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) < 1e-8 * smax) ++kdim;

  KernelReport rep;
  rep.m = m;
  rep.basis_dim = n;
  rep.kernel_dim = kdim;
  rep.potential_dim = basis.potential_dim;
  rep.gram_condition = cond;
  rep.singular_values.assign(sv.data(), sv.data() + sv.size());
  if (kdim > 0 && kdim < sv.size()) {
    rep.gap_ratio = sv(sv.size() - kdim - 1) / std::max(sv(sv.size() - kdim), 1e-300);
  } else {
    rep.gap_ratio = 1e300;  // nothing dropped (or everything): no finite gap
  }

  // principal angle between the SVD kernel and the potential coordinate
  // subspace, in the (normalized) Gram metric
  if (kdim > 0 && basis.potential_dim > 0) {
    Eigen::MatrixXd K = svd.matrixV().rightCols(kdim);
    // the potential coordinate subspace is scale-invariant, so the identity
    // block represents it in normalized coordinates too
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, basis.potential_dim);
    for (int i = 0; i < basis.potential_dim; ++i) P(i, i) = 1.0;
    Eigen::LLT<Eigen::MatrixXd> llt(Gn);
    Eigen::MatrixXd L = llt.matrixL();
    Eigen::MatrixXd Kw = L.transpose() * K;
    Eigen::MatrixXd Pw = L.transpose() * P;
    Eigen::HouseholderQR<Eigen::MatrixXd> qk(Kw), qp(Pw);
    Eigen::MatrixXd Qk = qk.householderQ() * Eigen::MatrixXd::Identity(n, kdim);
    Eigen::MatrixXd Qp =
        qp.householderQ() * Eigen::MatrixXd::Identity(n, basis.potential_dim);
    Eigen::BDCSVD<Eigen::MatrixXd> ang(Qk.transpose() * Qp);
    double cmin = std::clamp(ang.singularValues().minCoeff(), -1.0, 1.0);
    rep.principal_angle = std::acos(cmin);
  } else {
    rep.principal_angle = 0.0;
  }
  return rep;
}

RecoveryResult recover_tensor(const ChartPtr& chart, const ExternalField& field,
                              const Eigen::VectorXd& data, int m, double reg,
                              const KernelBases& bases, const FanSpec& fan,
                              const OrbitOptions& opt,
                              const std::optional<Eigen::VectorXd>& truth) {
  TensorBasis basis = build_tensor_basis(chart, field, m, bases);
  phase::Frame fr(chart, field);
  Eigen::MatrixXd G = gram_matrix(basis.lifts, fr);
  Eigen::MatrixXd A = transform_matrix(chart, field, basis.lifts, fan, opt);
  if (data.size() != A.rows()) throw ConfigError("recover_tensor: data/fan size mismatch");

  Eigen::BDCSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::VectorXd sv = svd.singularValues();
  double smax = sv(0);
  double lam = reg >= 0.0 ? reg : 1e-6 * smax * smax;
  Eigen::VectorXd utd = svd.matrixU().transpose() * data;
  Eigen::VectorXd filt(sv.size());
  for (int i = 0; i < sv.size(); ++i) filt(i) = sv(i) * utd(i) / (sv(i) * sv(i) + lam);
  RecoveryResult out;
  out.coeffs = svd.matrixV() * filt;
  out.data_residual = (A * out.coeffs - data).norm();

  auto gnorm = [&](const Eigen::VectorXd& v) { return std::sqrt(std::max(0.0, v.dot(G * v))); };

  const int p = basis.potential_dim;
  Eigen::VectorXd sol = out.coeffs;
  if (p > 0) {
    // G-orthogonal projection onto the potential coordinate subspace
    Eigen::MatrixXd Gpp = G.topLeftCorner(p, p);
    Eigen::VectorXd rhs = G.topRows(p) * out.coeffs;
    Eigen::VectorXd cp = Gpp.ldlt().solve(rhs);
    sol = out.coeffs;
    sol.segment(0, p) -= cp;
    // sol now represents the estimate minus its potential part
  }
  double scale = truth ? gnorm(*truth) : gnorm(out.coeffs);
  out.solenoidal_ratio = scale > 0 ? gnorm(sol) / scale : 0.0;
  if (truth) {
    Eigen::VectorXd diff = out.coeffs - *truth;
    out.rel_error = gnorm(*truth) > 0 ? gnorm(diff) / gnorm(*truth) : gnorm(diff);
  }
  return out;
}

}  // namespace thermoray::xray
