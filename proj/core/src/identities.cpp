#include "thermoray/identities.hpp"

#include <cmath>

namespace thermoray::phase {

namespace {

double stack_sup(const PhaseFunction& u) {
  double s = 0.0;
  const auto& c = *u.chart();
  for (int k : u.support()) {
    const CGrid& g = u.mode_samples(k);
    for (int j = 0; j < c.ny(); ++j)
      for (int i = 0; i < c.nx(); ++i)
        if (c.node_inside(i, j)) s = std::max(s, std::abs(g.at(i, j)));
  }
  return s;
}

// grid-sampled difference of two stacks (sup-norm diagnostics only)
PhaseFunction stack_sub(const PhaseFunction& a, const PhaseFunction& b) {
  PhaseFunction out(a.chart(), a.kmax());
  for (int k = -a.kmax(); k <= a.kmax(); ++k) {
    bool ha = a.has_mode(k), hb = b.has_mode(k) && std::abs(k) <= b.kmax();
    if (!ha && !hb) continue;
    CGrid g(a.chart()->nx(), a.chart()->ny());
    if (ha) g = a.mode_samples(k);
    if (hb) {
      const CGrid& h = b.mode_samples(k);
      for (std::size_t n = 0; n < g.a.size(); ++n) g.a[n] -= h.a[n];
    }
    out.set_mode_grid(k, g);
  }
  return out;
}

PhaseFunction stack_add(const PhaseFunction& a, const PhaseFunction& b) {
  PhaseFunction out(a.chart(), a.kmax());
  for (int k = -a.kmax(); k <= a.kmax(); ++k) {
    bool ha = a.has_mode(k), hb = b.has_mode(k);
    if (!ha && !hb) continue;
    CGrid g(a.chart()->nx(), a.chart()->ny());
    if (ha) g = a.mode_samples(k);
    if (hb) {
      const CGrid& h = b.mode_samples(k);
      for (std::size_t n = 0; n < g.a.size(); ++n) g.a[n] += h.a[n];
    }
    out.set_mode_grid(k, g);
  }
  return out;
}

PhaseFunction constant_one(const Frame& fr) {
  PhaseFunction one(fr.chart(), fr.chart()->kmax());
  one.set_mode(0, ComplexExpr::real(expr::constant(1.0)));
  return one;
}

// integral over SM of a stack (pairing against 1)
cplx sm_integral(const PhaseFunction& u, const Frame& fr) {
  return inner_product(u, constant_one(fr), fr);
}

void require_headroom(const PhaseFunction& u, int levels) {
  if (u.max_abs_mode() + levels > u.kmax())
    throw HypothesisError("test function occupies the top Fourier modes; raise Nphi");
}

void require_torus(const Frame& fr, const char* what) {
  if (!fr.chart()->is_torus())
    throw HypothesisError(std::string(what) + " requires a closed (torus) chart");
}

void require_interior(const PhaseFunction& u, const char* what) {
  if (!u.boundary_vanishing())
    throw HypothesisError(std::string(what) + " requires interior-supported data");
  double tail = sup_outside_radius(u, 0.85);
  double scale = stack_sup(u);
  if (scale > 0 && tail > 1e-9 * scale)
    throw HypothesisError(std::string(what) +
                          ": test function does not vanish near the boundary");
}

}  // namespace

ResidualRecord make_record(const std::string& name, double lhs, double rhs, double tol) {
  ResidualRecord r;
  r.name = name;
  r.lhs = lhs;
  r.rhs = rhs;
  r.abs_residual = std::abs(lhs - rhs);
  double scale = std::max(std::abs(lhs), std::abs(rhs));
  r.rel_residual = scale > 0 ? r.abs_residual / scale : r.abs_residual;
  r.tolerance = tol;
  r.pass = r.rel_residual <= tol;
  return r;
}

ResidualRecord check_structure_equations(const Frame& fr, const PhaseFunction& u, double tol) {
  require_headroom(u, 2);
  PhaseFunction xu = apply(FrameOp::X, u, fr);
  PhaseFunction vu = apply(FrameOp::V, u, fr);
  PhaseFunction xpu = apply(FrameOp::XPerp, u, fr);

  // X = [V, X_perp]
  PhaseFunction r1 = stack_sub(stack_sub(apply(FrameOp::V, xpu, fr), apply(FrameOp::XPerp, vu, fr)), xu);
  // X_perp = [X, V]
  PhaseFunction r2 = stack_sub(stack_sub(apply(FrameOp::X, vu, fr), apply(FrameOp::V, xu, fr)), xpu);
  // [X, X_perp] = -K V
  PhaseFunction kvu = mult_scalar(vu, fr.gauss());
  PhaseFunction r3 = stack_add(stack_sub(apply(FrameOp::X, xpu, fr), apply(FrameOp::XPerp, xu, fr)), kvu);

  double scale = std::max({stack_sup(xu), stack_sup(xpu), stack_sup(kvu), 1e-30});
  double res = std::max({stack_sup(r1), stack_sup(r2), stack_sup(r3)});
  ResidualRecord rec;
  rec.name = "structure_eqs";
  rec.lhs = res;
  rec.rhs = 0.0;
  rec.abs_residual = res;
  rec.rel_residual = res / scale;
  rec.tolerance = tol;
  rec.pass = rec.rel_residual <= tol;
  return rec;
}

ResidualRecord check_lie_derivative(const Frame& fr, const PhaseFunction& f, double tol) {
  require_torus(fr, "lie_derivative");
  require_headroom(f, 1);
  cplx a = sm_integral(apply(FrameOp::Generator, f, fr), fr);
  cplx b = sm_integral(mult_vlambda(f, fr), fr);
  double scale = std::max({std::abs(a), std::abs(b),
                           std::sqrt(norm_sq(f, fr)) * std::sqrt(norm_sq(mult_vlambda(constant_one(fr), fr), fr))});
  ResidualRecord rec;
  rec.name = "lie_derivative";
  rec.lhs = std::abs(a);
  rec.rhs = std::abs(b);
  rec.abs_residual = std::abs(a + b);
  rec.rel_residual = scale > 0 ? rec.abs_residual / scale : rec.abs_residual;
  rec.tolerance = tol;
  rec.pass = rec.rel_residual <= tol;
  return rec;
}

std::vector<ResidualRecord> check_adjoints(const Frame& fr, const PhaseFunction& u,
                                           const PhaseFunction& v, double tol) {
  require_torus(fr, "adjoints");
  require_headroom(u, 1);
  require_headroom(v, 1);
  double uv = std::sqrt(norm_sq(u, fr) * norm_sq(v, fr));
  std::vector<ResidualRecord> out;

  auto skewness = [&](const std::string& name, const PhaseFunction& au, const PhaseFunction& av,
                      cplx extra) {
    cplx l = inner_product(au, v, fr);
    cplx r = -inner_product(u, av, fr) - extra;
    ResidualRecord rec;
    rec.name = name;
    rec.lhs = std::abs(l);
    rec.rhs = std::abs(r);
    rec.abs_residual = std::abs(l - r);
    double scale = std::max({std::abs(l), std::abs(r), uv});
    rec.rel_residual = scale > 0 ? rec.abs_residual / scale : rec.abs_residual;
    rec.tolerance = tol;
    rec.pass = rec.rel_residual <= tol;
    out.push_back(rec);
  };

  skewness("adjoint_v", apply(FrameOp::V, u, fr), apply(FrameOp::V, v, fr), 0.0);
  skewness("adjoint_xperp", apply(FrameOp::XPerp, u, fr), apply(FrameOp::XPerp, v, fr), 0.0);
  skewness("adjoint_ge", apply(FrameOp::Generator, u, fr), apply(FrameOp::Generator, v, fr),
           inner_product(mult_vlambda(u, fr), v, fr));
  return out;
}

ResidualRecord check_pestov(const Frame& fr, const PhaseFunction& u, bool boundary, double tol) {
  require_headroom(u, 2);
  if (boundary) {
    if (fr.chart()->is_torus())
      throw HypothesisError("pestov_boundary requires a disk chart");
    require_interior(u, "pestov_boundary");
  } else {
    require_torus(fr, "pestov_closed");
  }
  PhaseFunction vu = apply(FrameOp::V, u, fr);
  PhaseFunction geu = apply(FrameOp::Generator, u, fr);
  double t1 = norm_sq(apply(FrameOp::Generator, vu, fr), fr);
  double t2 = inner_product(mult_scalar(vu, fr.kthermo()), vu, fr).real();
  double t3 = norm_sq(apply(FrameOp::V, geu, fr), fr);
  double t4 = norm_sq(geu, fr);
  ResidualRecord rec = make_record(boundary ? "pestov_boundary" : "pestov_closed", t1 - t2, t3 - t4, tol);
  double scale = std::max({std::abs(t1), std::abs(t2), std::abs(t3), std::abs(t4)});
  if (scale > 0) {
    rec.rel_residual = rec.abs_residual / scale;
    rec.pass = rec.rel_residual <= tol;
  }
  return rec;
}

ResidualRecord check_commutator(const Frame& fr, const PhaseFunction& u, double tol) {
  require_headroom(u, 2);
  PhaseFunction lhs =
      stack_sub(apply(FrameOp::Generator, apply(FrameOp::V, u, fr), fr),
                apply(FrameOp::V, apply(FrameOp::Generator, u, fr), fr));
  PhaseFunction rhs = horizontal_twist(u, fr);
  double res = stack_sup(stack_sub(lhs, rhs));
  double scale = std::max(stack_sup(rhs), 1e-30);
  ResidualRecord rec;
  rec.name = "commutator";
  rec.lhs = res;
  rec.rhs = 0.0;
  rec.abs_residual = res;
  rec.rel_residual = res / scale;
  rec.tolerance = tol;
  rec.pass = rec.rel_residual <= tol;
  return rec;
}

ResidualRecord check_mu_decomposition(const Frame& fr, const PhaseFunction& u, double tol) {
  require_headroom(u, 1);
  PhaseFunction lhs = horizontal_twist(u, fr);
  PhaseFunction mm = apply(FrameOp::MuMinus, u, fr);
  PhaseFunction mp = apply(FrameOp::MuPlus, u, fr);
  // i mu_- u - i mu_+ u
  PhaseFunction rhs(u.chart(), u.kmax());
  for (int k = -u.kmax(); k <= u.kmax(); ++k) {
    bool a = mm.has_mode(k), b = mp.has_mode(k);
    if (!a && !b) continue;
    CGrid g(u.chart()->nx(), u.chart()->ny());
    if (a) {
      g = mm.mode_samples(k);
      for (auto& z : g.a) z *= cplx(0, 1);
    }
    if (b) {
      const CGrid& h = mp.mode_samples(k);
      for (std::size_t n = 0; n < g.a.size(); ++n) g.a[n] -= cplx(0, 1) * h.a[n];
    }
    rhs.set_mode_grid(k, g);
  }
  double res = stack_sup(stack_sub(lhs, rhs));
  double scale = std::max(stack_sup(lhs), 1e-30);
  ResidualRecord rec;
  rec.name = "mu_decomposition";
  rec.lhs = res;
  rec.rhs = 0.0;
  rec.abs_residual = res;
  rec.rel_residual = res / scale;
  rec.tolerance = tol;
  rec.pass = rec.rel_residual <= tol;
  return rec;
}

ResidualRecord check_gk_identity(const Frame& fr, const PhaseFunction& u, double tol) {
  require_torus(fr, "gk_identity");
  auto sup = u.support();
  if (sup.size() != 1) throw HypothesisError("gk_identity requires u in a single Omega_k");
  int k = sup[0];
  require_headroom(u, 1);
  double mminus = norm_sq(apply(FrameOp::MuMinus, u, fr), fr);
  double mplus = norm_sq(apply(FrameOp::MuPlus, u, fr), fr);
  double ku = inner_product(mult_scalar(u, fr.kthermo()), u, fr).real();
  ResidualRecord rec = make_record("gk_identity_k" + std::to_string(k), 2.0 * k * mminus,
                                   2.0 * k * mplus + static_cast<double>(k) * k * ku, tol);
  double scale = std::max({2.0 * std::abs(k) * mminus, 2.0 * std::abs(k) * mplus,
                           static_cast<double>(k) * k * std::abs(ku)});
  if (scale > 0) {
    rec.rel_residual = rec.abs_residual / scale;
    rec.pass = rec.rel_residual <= tol;
  }
  return rec;
}

std::vector<ResidualRecord> check_prop1_expansions(const Frame& fr, const PhaseFunction& u, int m,
                                                   double tol) {
  require_torus(fr, "prop1_expansions");
  if (m < 1) throw HypothesisError("prop1_expansions requires m >= 1");
  for (int k : u.support())
    if (std::abs(k) < m)
      throw HypothesisError("prop1_expansions requires Fourier support |k| >= m");
  require_headroom(u, 2);

  auto mode = [&](int k) { return u.mode_projection(k); };
  PhaseFunction mum_up = apply(FrameOp::MuMinus, mode(m + 1), fr);    // Omega_m
  PhaseFunction mum_lo = apply(FrameOp::MuMinus, mode(m), fr);        // Omega_{m-1}
  PhaseFunction mup_dn = apply(FrameOp::MuPlus, mode(-m - 1), fr);    // Omega_{-m}
  PhaseFunction mup_hi = apply(FrameOp::MuPlus, mode(-m), fr);        // Omega_{-m+1}

  double a_up = norm_sq(mum_up, fr);
  double a_dn = norm_sq(mup_dn, fr);
  double b_lo = norm_sq(mum_lo, fr);
  double b_hi = norm_sq(mup_hi, fr);
  // m = 1: mu_- u_1 and mu_+ u_{-1} both live in Omega_0 and must be grouped
  double b_sum = m == 1 ? norm_sq(stack_add(mum_lo, mup_hi), fr) : b_lo + b_hi;
  double b_dif = m == 1 ? norm_sq(stack_sub(mum_lo, mup_hi), fr) : b_lo + b_hi;

  PhaseFunction geu = apply(FrameOp::Generator, u, fr);
  PhaseFunction gevu = apply(FrameOp::Generator, apply(FrameOp::V, u, fr), fr);
  PhaseFunction vgeu = apply(FrameOp::V, geu, fr);
  double vnorm = norm_sq(geu.truncated(m + 1), fr);
  double wnorm = norm_sq(gevu.truncated(m + 1), fr);
  double qnorm = norm_sq(vgeu.truncated(m + 1), fr);

  std::vector<ResidualRecord> out;
  out.push_back(make_record("prop1_expansion_ge_m" + std::to_string(m), norm_sq(geu, fr),
                            a_up + a_dn + b_sum + vnorm, tol));
  out.push_back(make_record("prop1_expansion_gev_m" + std::to_string(m), norm_sq(gevu, fr),
                            (m + 1.0) * (m + 1.0) * (a_up + a_dn) +
                                static_cast<double>(m) * m * b_dif + wnorm,
                            tol));
  out.push_back(make_record("prop1_expansion_vge_m" + std::to_string(m), norm_sq(vgeu, fr),
                            static_cast<double>(m) * m * (a_up + a_dn) +
                                (m - 1.0) * (m - 1.0) * (b_lo + b_hi) + qnorm,
                            tol));
  return out;
}

ResidualRecord check_prop1_inequality(const Frame& fr, const PhaseFunction& u, int m, double alpha,
                                      double tol) {
  require_torus(fr, "prop1_inequality");
  for (int k : u.support())
    if (std::abs(k) < m)
      throw HypothesisError("prop1_inequality requires Fourier support |k| >= m");
  require_headroom(u, 2);

  auto mode = [&](int k) { return u.mode_projection(k); };
  double a_up = norm_sq(apply(FrameOp::MuMinus, mode(m + 1), fr), fr);
  double a_dn = norm_sq(apply(FrameOp::MuPlus, mode(-m - 1), fr), fr);
  double b_lo = norm_sq(apply(FrameOp::MuMinus, mode(m), fr), fr);
  double b_hi = norm_sq(apply(FrameOp::MuPlus, mode(-m), fr), fr);

  PhaseFunction geu = apply(FrameOp::Generator, u, fr);
  PhaseFunction gevu = apply(FrameOp::Generator, apply(FrameOp::V, u, fr), fr);
  double vnorm = norm_sq(geu.truncated(m + 1), fr);
  double wnorm = norm_sq(gevu.truncated(m + 1), fr);
  double qnorm = norm_sq(apply(FrameOp::V, geu, fr).truncated(m + 1), fr);

  double c_inner = 1.0 - (m - 1.0) * (m - 1.0) + alpha * m * m;
  double c_outer = 1.0 - static_cast<double>(m) * m + alpha * (m + 1.0) * (m + 1.0);
  double rhs = c_inner * (b_lo + b_hi) + c_outer * (a_up + a_dn) + vnorm + alpha * wnorm;

  ResidualRecord rec;
  rec.name = "prop1_inequality_m" + std::to_string(m);
  rec.lhs = qnorm;
  rec.rhs = rhs;
  double scale = std::max(std::abs(qnorm), std::abs(rhs));
  rec.abs_residual = std::max(0.0, rhs - qnorm);
  rec.rel_residual = scale > 0 ? rec.abs_residual / scale : rec.abs_residual;
  rec.tolerance = tol;
  rec.pass = rec.rel_residual <= tol;
  return rec;
}

ResidualRecord check_mu_sum(const Frame& fr, const PhaseFunction& u, double tol) {
  require_headroom(u, 1);
  PhaseFunction sum = stack_add(apply(FrameOp::MuPlus, u, fr), apply(FrameOp::MuMinus, u, fr));
  PhaseFunction ge = apply(FrameOp::Generator, u, fr);
  double res = stack_sup(stack_sub(sum, ge));
  double scale = std::max(stack_sup(ge), 1e-30);
  ResidualRecord rec;
  rec.name = "mu_sum";
  rec.lhs = res;
  rec.rhs = 0.0;
  rec.abs_residual = res;
  rec.rel_residual = res / scale;
  rec.tolerance = tol;
  rec.pass = rec.rel_residual <= tol;
  return rec;
}

ResidualRecord check_kthermo_consistency(const Frame& fr, double tol) {
  // lambda as a stack, then S = X_perp lambda + lambda^2 + G_E V lambda.
  PhaseFunction lam(fr.chart(), fr.chart()->kmax());
  lam.set_mode(1, fr.lambda_plus());
  lam.set_mode(-1, fr.lambda_minus());
  PhaseFunction s = stack_add(
      stack_add(apply(FrameOp::XPerp, lam, fr), mult_lambda(lam, fr)),
      apply(FrameOp::Generator, apply(FrameOp::V, lam, fr), fr));

  const auto& c = *fr.chart();
  expr::Tape dive(fr.dive());
  double off = 0.0, on = 0.0, scale = 0.0;
  for (int k : s.support()) {
    const CGrid& g = s.mode_samples(k);
    for (int j = 0; j < c.ny(); ++j)
      for (int i = 0; i < c.nx(); ++i) {
        if (!c.node_inside(i, j)) continue;
        if (k == 0) {
          double d = dive(c.x_of(i), c.y_of(j));
          on = std::max(on, std::abs(g.at(i, j) + d));
          scale = std::max(scale, std::abs(d));
        } else {
          off = std::max(off, std::abs(g.at(i, j)));
        }
      }
  }
  scale = std::max(scale, 1.0);
  ResidualRecord rec;
  rec.name = "kthermo_consistency";
  rec.lhs = on;
  rec.rhs = off;
  rec.abs_residual = std::max(on, off);
  rec.rel_residual = rec.abs_residual / scale;
  rec.tolerance = tol;
  rec.pass = rec.rel_residual <= tol;
  return rec;
}

ResidualRecord check_parseval(const Frame& fr, const PhaseFunction& u, double tol) {
  // Fourier round trip: sample on the phi grid, project back, compare.
  const auto& c = *fr.chart();
  const int n = c.nphi();
  double worst = 0.0, scale = 1e-30;
  for (int j = 0; j < c.ny(); j += 3) {
    for (int i = 0; i < c.nx(); i += 3) {
      if (!c.node_inside(i, j)) continue;
      std::vector<cplx> samples(static_cast<std::size_t>(n));
      for (int l = 0; l < n; ++l) samples[l] = u.value_at(i, j, 2.0 * M_PI * l / n);
      for (int k : u.support()) {
        cplx proj = 0.0;
        for (int l = 0; l < n; ++l)
          proj += samples[l] * std::polar(1.0, -2.0 * M_PI * k * l / n);
        proj /= static_cast<double>(n);
        cplx ref = u.mode_samples(k).at(i, j);
        worst = std::max(worst, std::abs(proj - ref));
        scale = std::max(scale, std::abs(ref));
      }
    }
  }
  ResidualRecord rec;
  rec.name = "fourier_round_trip";
  rec.lhs = worst;
  rec.rhs = 0.0;
  rec.abs_residual = worst;
  rec.rel_residual = worst / scale;
  rec.tolerance = tol;
  rec.pass = rec.rel_residual <= tol;
  return rec;
}

}  // namespace thermoray::phase
