#include "thermoray/inverse.hpp"

#include <cmath>

namespace thermoray::inverse {

using geom::ConfigError;
using geom::HypothesisError;

StackGrid::StackGrid(ChartPtr chart, int kmax) : chart_(std::move(chart)), kmax_(kmax) {
  if (!chart_->is_torus()) throw ConfigError("StackGrid operators live on torus charts");
  modes_.assign(2 * kmax_ + 1, CGrid(chart_->nx(), chart_->ny()));
}

StackGrid StackGrid::from_phase(const phase::PhaseFunction& u) {
  StackGrid s(u.chart(), u.kmax());
  for (int k : u.support()) s.mode(k) = u.mode_samples(k);
  return s;
}

phase::PhaseFunction StackGrid::to_phase() const {
  phase::PhaseFunction u(chart_, kmax_);
  for (int k = -kmax_; k <= kmax_; ++k) u.set_mode_grid(k, mode(k));
  return u;
}

StackGrid& StackGrid::axpy(double a, const StackGrid& x) {
  for (int k = -kmax_; k <= kmax_; ++k) {
    auto& m = mode(k);
    const auto& xm = x.mode(k);
    for (std::size_t n = 0; n < m.a.size(); ++n) m.a[n] += a * xm.a[n];
  }
  return *this;
}

StackGrid& StackGrid::scale(double a) {
  for (auto& m : modes_)
    for (auto& v : m.a) v *= a;
  return *this;
}

void StackGrid::set_zero() {
  for (auto& m : modes_)
    for (auto& v : m.a) v = 0.0;
}

cplx dot(const StackGrid& a, const StackGrid& b) {
  const auto& c = *a.chart();
  double w = c.cell_area();
  cplx total = 0.0;
  for (int k = -a.kmax(); k <= a.kmax(); ++k) {
    const auto& am = a.mode(k);
    const auto& bm = b.mode(k);
    cplx s = 0.0;
    for (int j = 0; j < c.ny(); ++j)
      for (int i = 0; i < c.nx(); ++i)
        s += am.at(i, j) * std::conj(bm.at(i, j)) * c.e2rho().at(i, j);
    total += s;
  }
  return 2.0 * M_PI * w * total;
}

double norm(const StackGrid& a) { return std::sqrt(std::max(0.0, dot(a, a).real())); }

TorusOperators::TorusOperators(ChartPtr chart, const ExternalField& field, int kmax)
    : chart_(chart), kmax_(kmax), frame_(chart, field) {
  const auto& c = *chart_;
  if (!c.is_torus()) throw ConfigError("TorusOperators require a torus chart");
  int nx = c.nx(), ny = c.ny();
  emrho_ = CGrid(nx, ny);
  lam_p_ = CGrid(nx, ny);
  lam_m_ = CGrid(nx, ny);
  del_rho_ = CGrid(nx, ny);
  delbar_rho_ = CGrid(nx, ny);
  expr::Tape trho(c.rho()), trx(c.rho_x()), try_(c.rho_y());
  expr::Tape lpr(frame_.lambda_plus().re), lpi(frame_.lambda_plus().im);
  expr::Tape lmr(frame_.lambda_minus().re), lmi(frame_.lambda_minus().im);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      double x = c.x_of(i), y = c.y_of(j);
      emrho_.at(i, j) = std::exp(-trho(x, y));
      lam_p_.at(i, j) = cplx(lpr(x, y), lpi(x, y));
      lam_m_.at(i, j) = cplx(lmr(x, y), lmi(x, y));
      del_rho_.at(i, j) = 0.5 * cplx(trx(x, y), -try_(x, y));
      delbar_rho_.at(i, j) = 0.5 * cplx(trx(x, y), try_(x, y));
    }
}

StackGrid TorusOperators::v(const StackGrid& u) const {
  StackGrid out(chart_, kmax_);
  for (int k = -kmax_; k <= kmax_; ++k) {
    out.mode(k) = u.mode(k);
    for (auto& z : out.mode(k).a) z *= cplx(0, static_cast<double>(k));
  }
  return out;
}

StackGrid TorusOperators::ladder(const StackGrid& u, bool plus, bool with_lambda) const {
  StackGrid out(chart_, kmax_);
  double L = chart_->extent();
  for (int k = -kmax_; k <= kmax_; ++k) {
    int dst = plus ? k + 1 : k - 1;
    if (std::abs(dst) > kmax_) continue;
    const CGrid& h = u.mode(k);
    CGrid dx = grid::spectral_ddx(h, L);
    CGrid dy = grid::spectral_ddy(h, L);
    CGrid& o = out.mode(dst);
    for (std::size_t n = 0; n < h.a.size(); ++n) {
      cplx d = plus ? 0.5 * (dx.a[n] - cplx(0, 1) * dy.a[n])
                    : 0.5 * (dx.a[n] + cplx(0, 1) * dy.a[n]);
      cplx dr = plus ? del_rho_.a[n] : delbar_rho_.a[n];
      double sgn = plus ? -1.0 : 1.0;
      cplx val = emrho_.a[n] * (d + sgn * static_cast<double>(k) * h.a[n] * dr);
      if (with_lambda && k != 0) {
        const cplx& lam = plus ? lam_p_.a[n] : lam_m_.a[n];
        val += lam * cplx(0, static_cast<double>(k)) * h.a[n];
      }
      o.a[n] += val;
    }
  }
  return out;
}

StackGrid TorusOperators::generator(const StackGrid& u) const {
  StackGrid out = ladder(u, true, true);
  out.axpy(1.0, ladder(u, false, true));
  return out;
}

StackGrid TorusOperators::xperp(const StackGrid& u) const {
  StackGrid plus = ladder(u, true, false);
  StackGrid minus = ladder(u, false, false);
  StackGrid out(chart_, kmax_);
  for (int k = -kmax_; k <= kmax_; ++k) {
    CGrid& o = out.mode(k);
    const CGrid& p = plus.mode(k);
    const CGrid& m = minus.mode(k);
    for (std::size_t n = 0; n < o.a.size(); ++n)
      o.a[n] = cplx(0, -1) * p.a[n] + cplx(0, 1) * m.a[n];
  }
  return out;
}

StackGrid TorusOperators::mult_vlambda(const StackGrid& u) const {
  StackGrid out(chart_, kmax_);
  for (int k = -kmax_; k <= kmax_; ++k) {
    const CGrid& h = u.mode(k);
    if (std::abs(k + 1) <= kmax_) {
      CGrid& o = out.mode(k + 1);
      for (std::size_t n = 0; n < h.a.size(); ++n) o.a[n] += cplx(0, 1) * lam_p_.a[n] * h.a[n];
    }
    if (std::abs(k - 1) <= kmax_) {
      CGrid& o = out.mode(k - 1);
      for (std::size_t n = 0; n < h.a.size(); ++n) o.a[n] += cplx(0, -1) * lam_m_.a[n] * h.a[n];
    }
  }
  return out;
}

StackGrid TorusOperators::p(const StackGrid& u) const { return v(generator(u)); }

StackGrid TorusOperators::pstar(const StackGrid& u) const {
  StackGrid vu = v(u);
  StackGrid out = generator(vu);
  out.axpy(1.0, mult_vlambda(vu));
  return out;
}

StackGrid TorusOperators::tm(const StackGrid& u, int m) const {
  StackGrid out(chart_, kmax_);
  for (int k = -kmax_; k <= kmax_; ++k)
    if (std::abs(k) >= m + 1) out.mode(k) = u.mode(k);
  return out;
}

StackGrid TorusOperators::qm(const StackGrid& u, int m) const { return tm(p(u), m); }

StackGrid TorusOperators::qmstar(const StackGrid& u, int m) const { return pstar(tm(u, m)); }

double TorusOperators::h1_norm_sq(const StackGrid& u) const {
  StackGrid ge = generator(u);
  StackGrid tw = xperp(u);
  tw.axpy(-1.0, mult_vlambda(v(u)));
  StackGrid vu = v(u);
  double a = dot(ge, ge).real(), b = dot(tw, tw).real(), c = dot(vu, vu).real(),
         d = dot(u, u).real();
  return a + b + c + d;
}

cplx TorusOperators::mean(const StackGrid& u) const {
  const auto& c = *chart_;
  cplx s = 0.0;
  for (int j = 0; j < c.ny(); ++j)
    for (int i = 0; i < c.nx(); ++i) s += u.mode(0).at(i, j) * c.e2rho().at(i, j);
  return 2.0 * M_PI * c.cell_area() * s;
}

AdjointCheck adjoint_consistency(const TorusOperators& ops, int m, rng::Rng& rng, int samples) {
  AdjointCheck out;
  for (int s = 0; s < samples; ++s) {
    auto u = StackGrid::from_phase(
        rng::random_bandlimited(rng, ops.chart(), std::min(6, ops.kmax() - 2), 3, 1.0));
    auto v = StackGrid::from_phase(
        rng::random_bandlimited(rng, ops.chart(), std::min(6, ops.kmax() - 2), 3, 1.0));
    double scale = norm(u) * norm(v);
    out.p_defect = std::max(
        out.p_defect, std::abs(dot(ops.p(u), v) - dot(u, ops.pstar(v))) / std::max(scale, 1e-300));
    out.q_defect = std::max(out.q_defect,
                            std::abs(dot(ops.qm(u, m), v) - dot(u, ops.qmstar(v, m))) /
                                std::max(scale, 1e-300));
  }
  return out;
}

ControlConstants estimate_control_constants(const TorusOperators& ops, int m, int samples,
                                            rng::Rng& rng) {
  ControlConstants out;
  out.samples = samples;
  StackGrid one(ops.chart(), ops.kmax());
  for (auto& z : one.mode(0).a) z = 1.0;
  double vol = dot(one, one).real();

  for (int s = 0; s < samples; ++s) {
    // zero-mean sample for C_P
    auto u = StackGrid::from_phase(
        rng::random_bandlimited(rng, ops.chart(), std::min(6, ops.kmax() - 2), 3, 1.0));
    cplx mu = ops.mean(u) / vol;
    for (auto& z : u.mode(0).a) z -= mu;
    double pu = norm(ops.p(u));
    double uh = std::sqrt(ops.h1_norm_sq(u));
    if (pu <= 1e-12 * std::max(uh, 1e-300)) {
      ++out.degenerate;
    } else {
      out.c_p = std::max(out.c_p, uh / pu);
    }

    // high-mode sample for C_Q
    auto w = StackGrid::from_phase(rng::random_bandlimited_from(
        rng, ops.chart(), m, std::min(m + 4, ops.kmax() - 2), 3, 1.0));
    double qw = norm(ops.qm(w, m));
    double wh = std::sqrt(ops.h1_norm_sq(w));
    if (qw <= 1e-12 * std::max(wh, 1e-300)) {
      ++out.degenerate;
    } else {
      out.c_q = std::max(out.c_q, wh / qw);
    }
  }
  return out;
}

SolveReport cgnr(const std::function<StackGrid(const StackGrid&)>& B,
                 const std::function<StackGrid(const StackGrid&)>& Bt, const StackGrid& rhs,
                 StackGrid& h, double rel_tol, int max_iter, const std::string& name) {
  SolveReport rep;
  rep.operator_name = name;
  rep.rhs_norm = norm(rhs);

  StackGrid r = rhs;  // residual rhs - B h, with h = 0
  h.set_zero();
  StackGrid s = Bt(r);
  StackGrid p = s;
  double gamma = dot(s, s).real();
  double gamma0 = std::sqrt(gamma);
  double best = std::numeric_limits<double>::infinity();
  int stall = 0;

  int it = 0;
  for (; it < max_iter; ++it) {
    if (std::sqrt(gamma) <= rel_tol * gamma0) {
      rep.converged = true;
      break;
    }
    StackGrid q = B(p);
    double qq = dot(q, q).real();
    if (qq <= 0.0) break;
    double alpha = gamma / qq;
    h.axpy(alpha, p);
    r.axpy(-alpha, q);
    s = Bt(r);
    double gamma_new = dot(s, s).real();
    double beta = gamma_new / gamma;
    gamma = gamma_new;
    StackGrid pn = s;
    pn.axpy(beta, p);
    p = pn;

    double res = norm(r);
    if (res < best * (1.0 - 1e-4)) {
      best = res;
      stall = 0;
    } else if (++stall > 50) {
      break;  // stagnated: report the reached residual
    }
  }
  rep.iterations = it;
  StackGrid fin = B(h);
  fin.axpy(-1.0, rhs);
  rep.residual = norm(fin);
  rep.rel_residual = rep.rhs_norm > 0 ? rep.residual / rep.rhs_norm : rep.residual;
  rep.normal_residual = gamma0 > 0 ? std::sqrt(gamma) / gamma0 : 0.0;
  return rep;
}

InvariantFunctionResult construct_invariant_function(const TorusOperators& ops,
                                                     const expr::Expr& f, const StackGrid* a,
                                                     double rel_tol, int max_iter) {
  const auto& chart = ops.chart();
  StackGrid fstack(chart, ops.kmax());
  expr::Tape tf(f);
  for (int j = 0; j < chart->ny(); ++j)
    for (int i = 0; i < chart->nx(); ++i)
      fstack.mode(0).at(i, j) = tf(chart->x_of(i), chart->y_of(j));

  StackGrid rhs = ops.generator(fstack);
  rhs.axpy(1.0, ops.mult_vlambda(fstack));
  rhs.scale(-1.0);
  if (a) rhs.axpy(1.0, *a);

  double rn = norm(rhs);
  if (std::abs(ops.mean(rhs)) > 1e-8 * std::max(rn, 1e-300))
    throw HypothesisError("construct_invariant_function: rhs pairs nontrivially with constants");

  std::size_t unknowns =
      static_cast<std::size_t>(2 * ops.kmax() + 1) * chart->nx() * chart->ny();
  if (max_iter < 0) max_iter = static_cast<int>(std::min<std::size_t>(10 * unknowns, 100000));

  StackGrid h(chart, ops.kmax());
  auto B = [&](const StackGrid& u) { return ops.pstar(u); };
  auto Bt = [&](const StackGrid& u) { return ops.p(u); };
  InvariantFunctionResult out;
  out.solve = cgnr(B, Bt, rhs, h, rel_tol, max_iter, "Pstar");

  out.w = ops.v(h);
  // w = V h + f: mode 0 of V h is identically zero, so w_0 == f bit-exactly
  double defect = 0.0;
  for (std::size_t n = 0; n < out.w.mode(0).a.size(); ++n) {
    defect = std::max(defect, std::abs(out.w.mode(0).a[n]));
    out.w.mode(0).a[n] = fstack.mode(0).a[n];
  }
  out.w0_defect = defect;

  StackGrid inv = ops.generator(out.w);
  inv.axpy(1.0, ops.mult_vlambda(out.w));
  if (a) inv.axpy(-1.0, *a);
  out.invariance_residual = norm(inv);
  return out;
}

namespace {

// lift of the coordinate 1-form a dx + b dy as a two-mode stack
StackGrid oneform_stack(const ChartPtr& chart, int kmax, const expr::Expr& a,
                        const expr::Expr& b) {
  StackGrid s(chart, kmax);
  expr::Tape ta(a), tb(b);
  expr::Tape trho(chart->rho());
  for (int j = 0; j < chart->ny(); ++j)
    for (int i = 0; i < chart->nx(); ++i) {
      double x = chart->x_of(i), y = chart->y_of(j);
      double emr = std::exp(-trho(x, y));
      cplx av(ta(x, y), 0.0), bv(tb(x, y), 0.0);
      s.mode(1).at(i, j) = 0.5 * emr * (av - cplx(0, 1) * bv);
      s.mode(-1).at(i, j) = 0.5 * emr * (av + cplx(0, 1) * bv);
    }
  return s;
}

}  // namespace

double solenoid_residual(const ChartPtr& chart, const expr::Expr& a, const expr::Expr& b) {
  // eta_+ alpha_{-1} + eta_- alpha_1 = e^{-2 rho}(a_x + b_y)/2
  expr::Expr div = expr::differentiate(a, expr::Var::X) + expr::differentiate(b, expr::Var::Y);
  expr::Expr res = call(expr::Fn::Exp, expr::constant(-2.0) * chart->rho()) * div *
                   expr::constant(0.5);
  expr::Tape t(res);
  double acc = 0.0;
  for (int j = 0; j < chart->ny(); ++j)
    for (int i = 0; i < chart->nx(); ++i) {
      double v = t(chart->x_of(i), chart->y_of(j));
      acc += v * v * chart->quad_weight(i, j) * chart->e2rho().at(i, j);
    }
  return std::sqrt(acc);
}

OneFormResult construct_invariant_oneform(const TorusOperators& ops, const expr::Expr& a,
                                          const expr::Expr& b, double rel_tol, int max_iter) {
  const auto& chart = ops.chart();
  StackGrid alpha = oneform_stack(chart, ops.kmax(), a, b);

  OneFormResult out;
  out.solenoid_residual = solenoid_residual(chart, a, b);
  double ascale = norm(alpha);
  if (out.solenoid_residual > 1e-8 * std::max(ascale, 1e-300))
    throw HypothesisError("construct_invariant_oneform: input 1-form is not solenoidal");

  StackGrid rhs = ops.generator(alpha);
  rhs.axpy(1.0, ops.mult_vlambda(alpha));
  rhs.scale(-1.0);

  // a_0 = 0 for solenoidal input
  double a0 = 0.0;
  {
    const auto& c = *chart;
    double acc = 0.0;
    for (int j = 0; j < c.ny(); ++j)
      for (int i = 0; i < c.nx(); ++i)
        acc += std::norm(rhs.mode(0).at(i, j)) * c.quad_weight(i, j) * c.e2rho().at(i, j);
    a0 = std::sqrt(2.0 * M_PI * acc);
  }
  out.a0_norm = a0;

  std::size_t unknowns =
      static_cast<std::size_t>(2 * ops.kmax() + 1) * chart->nx() * chart->ny();
  if (max_iter < 0) max_iter = static_cast<int>(std::min<std::size_t>(10 * unknowns, 100000));

  StackGrid h(chart, ops.kmax());
  auto B = [&](const StackGrid& u) { return ops.qmstar(u, 1); };
  auto Bt = [&](const StackGrid& u) { return ops.qm(u, 1); };
  out.solve = cgnr(B, Bt, rhs, h, rel_tol, max_iter, "Q1star");

  out.w = ops.v(ops.tm(h, 1));
  double defect = 0.0;
  for (int k : {-1, 1}) {
    const CGrid& wk = out.w.mode(k);
    for (std::size_t n = 0; n < wk.a.size(); ++n)
      defect = std::max(defect, std::abs(wk.a[n]));  // must be zero before adding alpha
  }
  out.w.axpy(1.0, alpha);
  out.w_pm1_defect = defect;

  StackGrid inv = ops.generator(out.w);
  inv.axpy(1.0, ops.mult_vlambda(out.w));
  out.invariance_residual = norm(inv);
  return out;
}

OneFormGrid solenoidal_project(const ChartPtr& chart, const expr::Expr& a, const expr::Expr& b) {
  if (!chart->is_torus()) throw ConfigError("solenoidal_project lives on torus charts");
  const int nx = chart->nx(), ny = chart->ny();
  const double L = chart->extent();
  CGrid av(nx, ny), bv(nx, ny);
  expr::Tape ta(a), tb(b);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      av.at(i, j) = ta(chart->x_of(i), chart->y_of(j));
      bv.at(i, j) = tb(chart->x_of(i), chart->y_of(j));
    }
  CGrid div = grid::spectral_ddx(av, L);
  CGrid divy = grid::spectral_ddy(bv, L);
  for (std::size_t n = 0; n < div.a.size(); ++n) div.a[n] += divy.a[n];
  CGrid psi = grid::spectral_poisson(div, L);
  CGrid px = grid::spectral_ddx(psi, L), py = grid::spectral_ddy(psi, L);

  OneFormGrid out;
  out.chart = chart;
  out.a = grid::RGrid(nx, ny);
  out.b = grid::RGrid(nx, ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      out.a.at(i, j) = (av.at(i, j) - px.at(i, j)).real();
      out.b.at(i, j) = (bv.at(i, j) - py.at(i, j)).real();
    }

  // residual of the eta_+/eta_- check on the projected form
  CGrid ra(nx, ny), rb(nx, ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      ra.at(i, j) = out.a.at(i, j);
      rb.at(i, j) = out.b.at(i, j);
    }
  CGrid dax = grid::spectral_ddx(ra, L);
  CGrid dby = grid::spectral_ddy(rb, L);
  double acc = 0.0;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      double e2 = chart->e2rho().at(i, j);
      double v = 0.5 * (dax.at(i, j) + dby.at(i, j)).real() / e2;
      acc += v * v * chart->quad_weight(i, j) * e2;
    }
  out.solenoid_residual = std::sqrt(acc);
  return out;
}

}  // namespace thermoray::inverse
