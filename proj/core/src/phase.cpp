#include "thermoray/phase.hpp"

#include <cmath>
#include <stdexcept>

namespace thermoray::phase {

using expr::constant;
using expr::Fn;

ComplexExpr ComplexExpr::del() const {
  ComplexExpr dx = ddx(), dy = ddy();
  // (dx - i dy)/2
  ComplexExpr r = dx - dy.times_i();
  return {r.re * constant(0.5), r.im * constant(0.5)};
}

ComplexExpr ComplexExpr::delbar() const {
  ComplexExpr dx = ddx(), dy = ddy();
  ComplexExpr r = dx + dy.times_i();
  return {r.re * constant(0.5), r.im * constant(0.5)};
}

// ---------------------------------------------------------------------------
// PhaseFunction
// ---------------------------------------------------------------------------

PhaseFunction::PhaseFunction(ChartPtr chart, int kmax)
    : chart_(std::move(chart)), kmax_(kmax), modes_(2 * kmax + 1) {}

PhaseFunction::Mode& PhaseFunction::slot(int k) {
  if (std::abs(k) > kmax_) throw std::out_of_range("phase mode out of range");
  return modes_[static_cast<std::size_t>(k + kmax_)];
}

const PhaseFunction::Mode& PhaseFunction::slot(int k) const {
  if (std::abs(k) > kmax_) throw std::out_of_range("phase mode out of range");
  return modes_[static_cast<std::size_t>(k + kmax_)];
}

bool PhaseFunction::has_mode(int k) const {
  if (std::abs(k) > kmax_) return false;
  const Mode& m = slot(k);
  return m.sym.has_value() || m.grid.has_value();
}

bool PhaseFunction::mode_is_symbolic(int k) const { return slot(k).sym.has_value(); }

const ComplexExpr& PhaseFunction::mode_expr(int k) const {
  const Mode& m = slot(k);
  if (!m.sym) throw std::logic_error("mode has no symbolic form");
  return *m.sym;
}

void PhaseFunction::set_mode(int k, ComplexExpr c) {
  Mode& m = slot(k);
  m.sym = std::move(c);
  m.grid.reset();
  m.cache.reset();
}

void PhaseFunction::set_mode_grid(int k, CGrid g) {
  Mode& m = slot(k);
  m.sym.reset();
  m.grid = std::move(g);
  m.cache.reset();
}

void PhaseFunction::add_mode(int k, const ComplexExpr& c) {
  Mode& m = slot(k);
  if (m.grid) throw std::logic_error("cannot add symbolic data to a grid mode");
  if (m.sym)
    m.sym = *m.sym + c;
  else
    m.sym = c;
  m.cache.reset();
}

void PhaseFunction::add_mode_grid(int k, const CGrid& g) {
  Mode& m = slot(k);
  if (m.sym) throw std::logic_error("cannot add grid data to a symbolic mode");
  if (m.grid) {
    for (std::size_t n = 0; n < g.a.size(); ++n) m.grid->a[n] += g.a[n];
  } else {
    m.grid = g;
  }
  m.cache.reset();
}

const CGrid& PhaseFunction::mode_samples(int k) const {
  const Mode& m = slot(k);
  if (m.grid) return *m.grid;
  if (m.cache) return *m.cache;
  CGrid out(chart_->nx(), chart_->ny());
  if (m.sym) {
    expr::Tape tre(m.sym->re), tim(m.sym->im);
    for (int j = 0; j < chart_->ny(); ++j)
      for (int i = 0; i < chart_->nx(); ++i) {
        if (!chart_->node_inside(i, j)) continue;
        double x = chart_->x_of(i), y = chart_->y_of(j);
        out.at(i, j) = cplx(tre(x, y), tim(x, y));
      }
  }
  m.cache = std::move(out);
  return *m.cache;
}

cplx PhaseFunction::value_at(int i, int j, double phi) const {
  cplx v = 0.0;
  for (int k = -kmax_; k <= kmax_; ++k) {
    if (!has_mode(k)) continue;
    v += mode_samples(k).at(i, j) * std::polar(1.0, k * phi);
  }
  return v;
}

std::vector<int> PhaseFunction::support() const {
  std::vector<int> s;
  for (int k = -kmax_; k <= kmax_; ++k)
    if (has_mode(k)) s.push_back(k);
  return s;
}

int PhaseFunction::max_abs_mode() const {
  int m = 0;
  for (int k : support()) m = std::max(m, std::abs(k));
  return m;
}

bool PhaseFunction::supported_within(int deg) const {
  for (int k : support())
    if (std::abs(k) > deg) return false;
  return true;
}

PhaseFunction PhaseFunction::truncated(int deg_low) const {
  PhaseFunction out(chart_, kmax_);
  out.boundary_vanishing_ = boundary_vanishing_;
  for (int k = -kmax_; k <= kmax_; ++k) {
    if (std::abs(k) < deg_low || !has_mode(k)) continue;
    const Mode& m = slot(k);
    if (m.sym)
      out.set_mode(k, *m.sym);
    else
      out.set_mode_grid(k, *m.grid);
  }
  return out;
}

PhaseFunction PhaseFunction::mode_projection(int k) const {
  PhaseFunction out(chart_, kmax_);
  out.boundary_vanishing_ = boundary_vanishing_;
  if (has_mode(k)) {
    const Mode& m = slot(k);
    if (m.sym)
      out.set_mode(k, *m.sym);
    else
      out.set_mode_grid(k, *m.grid);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Frame
// ---------------------------------------------------------------------------

Frame::Frame(ChartPtr chart, ExternalField field)
    : chart_(std::move(chart)),
      field_(std::move(field)),
      t_rho_(chart_->rho()),
      t_e1_(field_.e1()),
      t_e2_(field_.e2()) {
  field_.validate_on(*chart_);
  expr::Expr erho = call(Fn::Exp, chart_->rho());
  expr::Expr half = constant(0.5);
  // lambda = e^{rho}(-E1 sin phi + E2 cos phi)
  //        = e^{rho}[(i E1 + E2)/2] e^{i phi} + e^{rho}[(-i E1 + E2)/2] e^{-i phi}
  lambda_plus_ = ComplexExpr(erho * field_.e2() * half, erho * field_.e1() * half);
  lambda_minus_ = ComplexExpr(erho * field_.e2() * half, -(erho * field_.e1() * half));
  gauss_ = geom::gaussian_curvature_expr(*chart_);
  dive_ = geom::divergence_expr(*chart_, field_);
  kthermo_ = gauss_ - dive_;

  const auto& c = *chart_;
  int nx = c.nx(), ny = c.ny();
  grids_.emrho = CGrid(nx, ny);
  grids_.rho_x = CGrid(nx, ny);
  grids_.rho_y = CGrid(nx, ny);
  grids_.lam_p = CGrid(nx, ny);
  grids_.lam_m = CGrid(nx, ny);
  expr::Tape trho(c.rho()), trx(c.rho_x()), try_(c.rho_y());
  expr::Tape lpr(lambda_plus_.re), lpi(lambda_plus_.im);
  expr::Tape lmr(lambda_minus_.re), lmi(lambda_minus_.im);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      if (!c.node_inside(i, j)) continue;
      double x = c.x_of(i), y = c.y_of(j);
      grids_.emrho.at(i, j) = std::exp(-trho(x, y));
      grids_.rho_x.at(i, j) = trx(x, y);
      grids_.rho_y.at(i, j) = try_(x, y);
      grids_.lam_p.at(i, j) = cplx(lpr(x, y), lpi(x, y));
      grids_.lam_m.at(i, j) = cplx(lmr(x, y), lmi(x, y));
    }
}

double Frame::lambda_direct(double x, double y, double phi) const {
  double er = std::exp(t_rho_(x, y));
  return er * (-t_e1_(x, y) * std::sin(phi) + t_e2_(x, y) * std::cos(phi));
}

double Frame::vlambda_direct(double x, double y, double phi) const {
  double er = std::exp(t_rho_(x, y));
  return -er * (t_e1_(x, y) * std::cos(phi) + t_e2_(x, y) * std::sin(phi));
}

Frame::LambdaProjection Frame::project_lambda(double x, double y) const {
  const int n = chart_->nphi();
  cplx p = 0.0, m = 0.0;
  double other = 0.0;
  std::vector<cplx> coef(static_cast<std::size_t>(n), 0.0);
  for (int l = 0; l < n; ++l) {
    double phi = 2.0 * M_PI * l / n;
    double v = lambda_direct(x, y, phi);
    for (int k = 0; k < n; ++k) coef[k] += v * std::polar(1.0, -2.0 * M_PI * k * l / n);
  }
  for (int k = 0; k < n; ++k) {
    cplx c = coef[k] / static_cast<double>(n);
    int mode = k <= n / 2 ? k : k - n;
    if (mode == 1)
      p = c;
    else if (mode == -1)
      m = c;
    else
      other = std::max(other, std::abs(c));
  }
  return {p, m, other};
}

// ---------------------------------------------------------------------------
// Grid-mode derivative helpers
// ---------------------------------------------------------------------------

namespace {

// 4th-order central differences on the disk's Cartesian grid. Nodes whose
// stencil leaves the inside mask yield 0; callers restrict to interior data.
CGrid fd4(const CGrid& g, const IsothermalChart& chart, bool along_x) {
  CGrid out(g.nx, g.ny);
  double h = along_x ? (2.0 * chart.extent() / (g.nx - 1)) : (2.0 * chart.extent() / (g.ny - 1));
  auto in = [&](int i, int j) { return i >= 0 && i < g.nx && j >= 0 && j < g.ny && chart.node_inside(i, j); };
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      int di = along_x ? 1 : 0, dj = along_x ? 0 : 1;
      if (!in(i - 2 * di, j - 2 * dj) || !in(i + 2 * di, j + 2 * dj)) continue;
      out.at(i, j) = (-g.at(i + 2 * di, j + 2 * dj) + 8.0 * g.at(i + di, j + dj) -
                      8.0 * g.at(i - di, j - dj) + g.at(i - 2 * di, j - 2 * dj)) /
                     (12.0 * h);
    }
  }
  return out;
}

CGrid grid_ddx(const CGrid& g, const IsothermalChart& chart) {
  if (chart.is_torus()) return grid::spectral_ddx(g, chart.extent());
  return fd4(g, chart, true);
}

CGrid grid_ddy(const CGrid& g, const IsothermalChart& chart) {
  if (chart.is_torus()) return grid::spectral_ddy(g, chart.extent());
  return fd4(g, chart, false);
}

}  // namespace

// ---------------------------------------------------------------------------
// Operators
// ---------------------------------------------------------------------------

namespace {

// eta_+ on mode k: coefficient h -> e^{-rho} (del h - k h del rho) at k+1
// eta_- on mode k: coefficient h -> e^{-rho} (delbar h + k h delbar rho) at k-1
ComplexExpr eta_plus_sym(const ComplexExpr& h, int k, const Frame& fr) {
  const auto& c = *fr.chart();
  ComplexExpr drho(c.rho_x() * constant(0.5), -(c.rho_y() * constant(0.5)));
  ComplexExpr t = h.del() - (h * drho) * constant(static_cast<double>(k));
  expr::Expr emrho = call(Fn::Exp, -c.rho());
  return t * emrho;
}

ComplexExpr eta_minus_sym(const ComplexExpr& h, int k, const Frame& fr) {
  const auto& c = *fr.chart();
  ComplexExpr dbrho(c.rho_x() * constant(0.5), c.rho_y() * constant(0.5));
  ComplexExpr t = h.delbar() + (h * dbrho) * constant(static_cast<double>(k));
  expr::Expr emrho = call(Fn::Exp, -c.rho());
  return t * emrho;
}

CGrid eta_plus_grid(const CGrid& h, int k, const Frame& fr) {
  const Frame::Grids& gf = fr.grids();
  CGrid dx = grid_ddx(h, *fr.chart()), dy = grid_ddy(h, *fr.chart());
  CGrid out(h.nx, h.ny);
  for (std::size_t n = 0; n < h.a.size(); ++n) {
    cplx del = 0.5 * (dx.a[n] - cplx(0, 1) * dy.a[n]);
    cplx delrho = 0.5 * (gf.rho_x.a[n] - cplx(0, 1) * gf.rho_y.a[n]);
    out.a[n] = gf.emrho.a[n] * (del - static_cast<double>(k) * h.a[n] * delrho);
  }
  return out;
}

CGrid eta_minus_grid(const CGrid& h, int k, const Frame& fr) {
  const Frame::Grids& gf = fr.grids();
  CGrid dx = grid_ddx(h, *fr.chart()), dy = grid_ddy(h, *fr.chart());
  CGrid out(h.nx, h.ny);
  for (std::size_t n = 0; n < h.a.size(); ++n) {
    cplx delbar = 0.5 * (dx.a[n] + cplx(0, 1) * dy.a[n]);
    cplx delbarrho = 0.5 * (gf.rho_x.a[n] + cplx(0, 1) * gf.rho_y.a[n]);
    out.a[n] = gf.emrho.a[n] * (delbar + static_cast<double>(k) * h.a[n] * delbarrho);
  }
  return out;
}

enum class Ladder { Plus, Minus };

// Accumulates one ladder application (eta or mu) of mode k into out.
void ladder_into(PhaseFunction& out, const PhaseFunction& u, int k, Ladder which, bool with_lambda,
                 const Frame& fr) {
  int dst = which == Ladder::Plus ? k + 1 : k - 1;
  if (std::abs(dst) > out.kmax()) {
    // truncated: ladder output beyond the stack is dropped (mirrors the
    // bandlimit of the stored stack)
    return;
  }
  if (u.mode_is_symbolic(k)) {
    ComplexExpr h = u.mode_expr(k);
    ComplexExpr res = which == Ladder::Plus ? eta_plus_sym(h, k, fr) : eta_minus_sym(h, k, fr);
    if (with_lambda && k != 0) {
      const ComplexExpr& lam = which == Ladder::Plus ? fr.lambda_plus() : fr.lambda_minus();
      // + lambda_{+-1} * (ik h)
      res = res + (lam * h.times_i()) * constant(static_cast<double>(k));
    }
    out.add_mode(dst, res);
  } else {
    const CGrid& h = u.mode_samples(k);
    CGrid res = which == Ladder::Plus ? eta_plus_grid(h, k, fr) : eta_minus_grid(h, k, fr);
    if (with_lambda && k != 0) {
      const Frame::Grids& gf = fr.grids();
      const CGrid& lam = which == Ladder::Plus ? gf.lam_p : gf.lam_m;
      for (std::size_t n = 0; n < res.a.size(); ++n)
        res.a[n] += lam.a[n] * cplx(0, static_cast<double>(k)) * h.a[n];
    }
    out.add_mode_grid(dst, res);
  }
}

}  // namespace

PhaseFunction apply(FrameOp op, const PhaseFunction& u, const Frame& fr) {
  PhaseFunction out(u.chart(), u.kmax());
  out.set_boundary_vanishing(u.boundary_vanishing());
  for (int k : u.support()) {
    switch (op) {
      case FrameOp::V:
        if (u.mode_is_symbolic(k)) {
          out.add_mode(k, u.mode_expr(k).times_i() * constant(static_cast<double>(k)));
        } else {
          CGrid g = u.mode_samples(k);
          for (auto& v : g.a) v *= cplx(0, static_cast<double>(k));
          out.add_mode_grid(k, g);
        }
        break;
      case FrameOp::EtaPlus: ladder_into(out, u, k, Ladder::Plus, false, fr); break;
      case FrameOp::EtaMinus: ladder_into(out, u, k, Ladder::Minus, false, fr); break;
      case FrameOp::MuPlus: ladder_into(out, u, k, Ladder::Plus, true, fr); break;
      case FrameOp::MuMinus: ladder_into(out, u, k, Ladder::Minus, true, fr); break;
      case FrameOp::X:
        ladder_into(out, u, k, Ladder::Plus, false, fr);
        ladder_into(out, u, k, Ladder::Minus, false, fr);
        break;
      case FrameOp::XPerp:
        // X_perp = -i(eta_+ - eta_-)
        {
          PhaseFunction tmp(u.chart(), u.kmax());
          ladder_into(tmp, u, k, Ladder::Plus, false, fr);
          for (int d : tmp.support()) {
            if (tmp.mode_is_symbolic(d))
              out.add_mode(d, (tmp.mode_expr(d).times_i()) * constant(-1.0));
            else {
              CGrid g = tmp.mode_samples(d);
              for (auto& v : g.a) v *= cplx(0, -1);
              out.add_mode_grid(d, g);
            }
          }
          PhaseFunction tmp2(u.chart(), u.kmax());
          ladder_into(tmp2, u, k, Ladder::Minus, false, fr);
          for (int d : tmp2.support()) {
            if (tmp2.mode_is_symbolic(d))
              out.add_mode(d, tmp2.mode_expr(d).times_i());
            else {
              CGrid g = tmp2.mode_samples(d);
              for (auto& v : g.a) v *= cplx(0, 1);
              out.add_mode_grid(d, g);
            }
          }
        }
        break;
      case FrameOp::Generator:
        // G_E = X + lambda V, assembled from the X ladder and the lambda
        // mode shifts (deliberately not mu_+ + mu_-; that identity is a
        // tested invariant, not the implementation).
        ladder_into(out, u, k, Ladder::Plus, false, fr);
        ladder_into(out, u, k, Ladder::Minus, false, fr);
        if (k != 0) {
          if (u.mode_is_symbolic(k)) {
            ComplexExpr ikh = u.mode_expr(k).times_i() * constant(static_cast<double>(k));
            if (std::abs(k + 1) <= out.kmax()) out.add_mode(k + 1, fr.lambda_plus() * ikh);
            if (std::abs(k - 1) <= out.kmax()) out.add_mode(k - 1, fr.lambda_minus() * ikh);
          } else {
            const Frame::Grids& gf = fr.grids();
            const CGrid& h = u.mode_samples(k);
            CGrid gp(h.nx, h.ny), gm(h.nx, h.ny);
            for (std::size_t n = 0; n < h.a.size(); ++n) {
              cplx ikh = cplx(0, static_cast<double>(k)) * h.a[n];
              gp.a[n] = gf.lam_p.a[n] * ikh;
              gm.a[n] = gf.lam_m.a[n] * ikh;
            }
            if (std::abs(k + 1) <= out.kmax()) out.add_mode_grid(k + 1, gp);
            if (std::abs(k - 1) <= out.kmax()) out.add_mode_grid(k - 1, gm);
          }
        }
        break;
    }
  }
  return out;
}

PhaseFunction mult_lambda(const PhaseFunction& u, const Frame& fr) {
  PhaseFunction out(u.chart(), u.kmax());
  out.set_boundary_vanishing(u.boundary_vanishing());
  for (int k : u.support()) {
    if (u.mode_is_symbolic(k)) {
      const ComplexExpr& h = u.mode_expr(k);
      if (std::abs(k + 1) <= out.kmax()) out.add_mode(k + 1, fr.lambda_plus() * h);
      if (std::abs(k - 1) <= out.kmax()) out.add_mode(k - 1, fr.lambda_minus() * h);
    } else {
      const Frame::Grids& gf = fr.grids();
      const CGrid& h = u.mode_samples(k);
      CGrid gp(h.nx, h.ny), gm(h.nx, h.ny);
      for (std::size_t n = 0; n < h.a.size(); ++n) {
        gp.a[n] = gf.lam_p.a[n] * h.a[n];
        gm.a[n] = gf.lam_m.a[n] * h.a[n];
      }
      if (std::abs(k + 1) <= out.kmax()) out.add_mode_grid(k + 1, gp);
      if (std::abs(k - 1) <= out.kmax()) out.add_mode_grid(k - 1, gm);
    }
  }
  return out;
}

PhaseFunction mult_vlambda(const PhaseFunction& u, const Frame& fr) {
  // V(lambda) = i lambda_1 e^{i phi} - i lambda_{-1} e^{-i phi}
  PhaseFunction out(u.chart(), u.kmax());
  out.set_boundary_vanishing(u.boundary_vanishing());
  ComplexExpr vlp = fr.lambda_plus().times_i();
  ComplexExpr vlm = ComplexExpr{expr::constant(0.0), expr::constant(0.0)} -
                    fr.lambda_minus().times_i();
  for (int k : u.support()) {
    if (u.mode_is_symbolic(k)) {
      const ComplexExpr& h = u.mode_expr(k);
      if (std::abs(k + 1) <= out.kmax()) out.add_mode(k + 1, vlp * h);
      if (std::abs(k - 1) <= out.kmax()) out.add_mode(k - 1, vlm * h);
    } else {
      const Frame::Grids& gf = fr.grids();
      const CGrid& h = u.mode_samples(k);
      CGrid gp(h.nx, h.ny), gm(h.nx, h.ny);
      for (std::size_t n = 0; n < h.a.size(); ++n) {
        gp.a[n] = cplx(0, 1) * gf.lam_p.a[n] * h.a[n];
        gm.a[n] = cplx(0, -1) * gf.lam_m.a[n] * h.a[n];
      }
      if (std::abs(k + 1) <= out.kmax()) out.add_mode_grid(k + 1, gp);
      if (std::abs(k - 1) <= out.kmax()) out.add_mode_grid(k - 1, gm);
    }
  }
  return out;
}

PhaseFunction horizontal_twist(const PhaseFunction& u, const Frame& fr) {
  PhaseFunction xp = apply(FrameOp::XPerp, u, fr);
  PhaseFunction vl = mult_vlambda(apply(FrameOp::V, u, fr), fr);
  PhaseFunction out(u.chart(), u.kmax());
  out.set_boundary_vanishing(u.boundary_vanishing());
  for (int k = -u.kmax(); k <= u.kmax(); ++k) {
    bool a = xp.has_mode(k), b = vl.has_mode(k);
    if (!a && !b) continue;
    if ((!a || xp.mode_is_symbolic(k)) && (!b || vl.mode_is_symbolic(k))) {
      ComplexExpr r;
      if (a) r = xp.mode_expr(k);
      if (b) r = r - vl.mode_expr(k);
      out.set_mode(k, r);
    } else {
      CGrid g = a ? xp.mode_samples(k) : CGrid(u.chart()->nx(), u.chart()->ny());
      if (b) {
        const CGrid& h = vl.mode_samples(k);
        for (std::size_t n = 0; n < g.a.size(); ++n) g.a[n] -= h.a[n];
      }
      out.set_mode_grid(k, g);
    }
  }
  return out;
}

PhaseFunction mu_plus_coordinate(const PhaseFunction& u, const Frame& fr) {
  auto sup = u.support();
  if (sup.size() != 1 || !u.mode_is_symbolic(sup[0]))
    throw std::invalid_argument("mu_plus_coordinate expects a single symbolic mode");
  int m = sup[0];
  const auto& c = *fr.chart();
  ComplexExpr h = u.mode_expr(m);
  expr::Expr md = constant(static_cast<double>(m));
  ComplexExpr alpha_z(fr.field().e1() * constant(0.5), -(fr.field().e2() * constant(0.5)));
  expr::Expr e2rho = call(Fn::Exp, constant(2.0) * c.rho());
  expr::Expr emrho = call(Fn::Exp, -(md * c.rho()));
  ComplexExpr inner = h * emrho;
  ComplexExpr res = inner.del() - (alpha_z * inner) * (md * e2rho);
  expr::Expr pre = call(Fn::Exp, (md - constant(1.0)) * c.rho());
  PhaseFunction out(u.chart(), u.kmax());
  out.set_mode(m + 1, res * pre);
  return out;
}

// ---------------------------------------------------------------------------
// Inner products and norms
// ---------------------------------------------------------------------------

cplx inner_product(const PhaseFunction& u, const PhaseFunction& v, const Frame& fr) {
  const auto& c = *fr.chart();
  if (u.chart().get() != &c || v.chart().get() != &c)
    throw std::invalid_argument("inner_product: chart mismatch");
  cplx total = 0.0;
  for (int k = -std::min(u.kmax(), v.kmax()); k <= std::min(u.kmax(), v.kmax()); ++k) {
    if (!u.has_mode(k) || !v.has_mode(k)) continue;
    const CGrid& a = u.mode_samples(k);
    const CGrid& b = v.mode_samples(k);
    cplx s = 0.0;
    for (int j = 0; j < c.ny(); ++j)
      for (int i = 0; i < c.nx(); ++i)
        s += a.at(i, j) * std::conj(b.at(i, j)) * (c.quad_weight(i, j) * c.e2rho().at(i, j));
    total += s;
  }
  return 2.0 * M_PI * total;
}

double norm_sq(const PhaseFunction& u, const Frame& fr) {
  return inner_product(u, u, fr).real();
}

cplx inner_product_polar(const PhaseFunction& u, const PhaseFunction& v, const Frame& fr, int n_r,
                         int n_theta) {
  const auto& c = *fr.chart();
  if (c.is_torus()) return inner_product(u, v, fr);
  if (n_r % 2 == 0) ++n_r;
  const double R = c.extent();
  const double dr = R / (n_r - 1);
  const double dth = 2.0 * M_PI / n_theta;
  expr::Tape trho(c.rho());

  cplx total = 0.0;
  for (int k = -std::min(u.kmax(), v.kmax()); k <= std::min(u.kmax(), v.kmax()); ++k) {
    if (!u.has_mode(k) || !v.has_mode(k)) continue;
    if (!u.mode_is_symbolic(k) || !v.mode_is_symbolic(k))
      throw std::invalid_argument("polar inner product needs closed-form coefficients");
    expr::Tape ur(u.mode_expr(k).re), ui(u.mode_expr(k).im);
    expr::Tape vr(v.mode_expr(k).re), vi(v.mode_expr(k).im);
    cplx acc = 0.0;
    for (int a = 0; a < n_r; ++a) {
      double r = a * dr;
      double wr = (a == 0 || a == n_r - 1) ? 1.0 : (a % 2 == 1 ? 4.0 : 2.0);
      cplx ring = 0.0;
      for (int b = 0; b < n_theta; ++b) {
        double x = r * std::cos(b * dth), y = r * std::sin(b * dth);
        cplx uu(ur(x, y), ui(x, y));
        cplx vv(vr(x, y), vi(x, y));
        ring += uu * std::conj(vv) * std::exp(2.0 * trho(x, y));
      }
      acc += wr * ring * r;
    }
    total += acc * dr / 3.0 * dth;
  }
  return 2.0 * M_PI * total;
}

double h1_norm_sq(const PhaseFunction& u, const Frame& fr) {
  PhaseFunction ge = apply(FrameOp::Generator, u, fr);
  PhaseFunction tw = horizontal_twist(u, fr);
  PhaseFunction vu = apply(FrameOp::V, u, fr);
  return norm_sq(ge, fr) + norm_sq(tw, fr) + norm_sq(vu, fr) + norm_sq(u, fr);
}

PhaseFunction mult_scalar(const PhaseFunction& u, const expr::Expr& s) {
  PhaseFunction out(u.chart(), u.kmax());
  out.set_boundary_vanishing(u.boundary_vanishing());
  for (int k : u.support()) {
    if (u.mode_is_symbolic(k)) {
      out.set_mode(k, u.mode_expr(k) * s);
    } else {
      CGrid g = u.mode_samples(k);
      expr::Tape t(s);
      const auto& c = *u.chart();
      for (int j = 0; j < c.ny(); ++j)
        for (int i = 0; i < c.nx(); ++i) g.at(i, j) *= t(c.x_of(i), c.y_of(j));
      out.set_mode_grid(k, g);
    }
  }
  return out;
}

double sup_outside_radius(const PhaseFunction& u, double r_frac) {
  const auto& c = *u.chart();
  if (c.is_torus()) return 0.0;
  double lim2 = r_frac * r_frac * c.extent() * c.extent();
  double sup = 0.0;
  for (int k : u.support()) {
    const CGrid& g = u.mode_samples(k);
    for (int j = 0; j < c.ny(); ++j)
      for (int i = 0; i < c.nx(); ++i) {
        if (!c.node_inside(i, j)) continue;
        double x = c.x_of(i), y = c.y_of(j);
        if (x * x + y * y >= lim2) sup = std::max(sup, std::abs(g.at(i, j)));
      }
  }
  return sup;
}

}  // namespace thermoray::phase
