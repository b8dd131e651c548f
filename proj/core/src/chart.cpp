#include "thermoray/chart.hpp"

#include <cmath>

namespace thermoray::geom {

IsothermalChart::IsothermalChart(DomainKind kind, double extent, expr::Expr rho, int nx, int ny,
                                 int nphi)
    : kind_(kind),
      extent_(extent),
      rho_(std::move(rho)),
      nx_(nx),
      ny_(ny),
      nphi_(nphi) {
  if (extent_ <= 0.0) throw ConfigError("chart extent must be positive");
  if (nx_ < 8 || ny_ < 8) throw ConfigError("grid resolution too small (need >= 8)");
  if (nphi_ < 3 || nphi_ % 2 == 0) throw ConfigError("Nphi must be odd and >= 3");

  rho_x_ = expr::differentiate(rho_, expr::Var::X);
  rho_y_ = expr::differentiate(rho_, expr::Var::Y);
  rho_xx_ = expr::differentiate(rho_x_, expr::Var::X);
  rho_yy_ = expr::differentiate(rho_y_, expr::Var::Y);

  mask_ = grid::RGrid(nx_, ny_, 1.0);
  weights_ = grid::RGrid(nx_, ny_, 0.0);
  if (kind_ == DomainKind::Torus) {
    double w = cell_area();
    for (int j = 0; j < ny_; ++j)
      for (int i = 0; i < nx_; ++i) weights_.at(i, j) = w;
  } else {
    // inclusive-endpoint grid over [-R,R]^2; trapezoid edge factors x mask
    double w = cell_area();
    for (int j = 0; j < ny_; ++j) {
      for (int i = 0; i < nx_; ++i) {
        bool in = inside(x_of(i), y_of(j));
        mask_.at(i, j) = in ? 1.0 : 0.0;
        double f = 1.0;
        if (i == 0 || i == nx_ - 1) f *= 0.5;
        if (j == 0 || j == ny_ - 1) f *= 0.5;
        weights_.at(i, j) = in ? w * f : 0.0;
      }
    }
  }

  if (kind_ == DomainKind::Torus) require_periodic(rho_, "rho");

  e2rho_ = grid::RGrid(nx_, ny_, 0.0);
  expr::Tape t(rho_);
  for (int j = 0; j < ny_; ++j)
    for (int i = 0; i < nx_; ++i) {
      double v = t(x_of(i), y_of(j));
      if (!std::isfinite(v)) throw ConfigError("rho is not finite on the grid");
      e2rho_.at(i, j) = std::exp(2.0 * v);
    }
}

std::shared_ptr<const IsothermalChart> IsothermalChart::torus(double L, const std::string& rho_src,
                                                              int nx, int ny, int nphi) {
  return std::make_shared<IsothermalChart>(DomainKind::Torus, L, expr::parse(rho_src), nx, ny,
                                           nphi);
}

std::shared_ptr<const IsothermalChart> IsothermalChart::disk(double R, const std::string& rho_src,
                                                             int nx, int ny, int nphi) {
  return std::make_shared<IsothermalChart>(DomainKind::Disk, R, expr::parse(rho_src), nx, ny,
                                           nphi);
}

double IsothermalChart::x_of(int i) const {
  if (kind_ == DomainKind::Torus) return extent_ * i / nx_;
  return -extent_ + 2.0 * extent_ * i / (nx_ - 1);
}

double IsothermalChart::y_of(int j) const {
  if (kind_ == DomainKind::Torus) return extent_ * j / ny_;
  return -extent_ + 2.0 * extent_ * j / (ny_ - 1);
}

double IsothermalChart::cell_area() const {
  if (kind_ == DomainKind::Torus) return (extent_ / nx_) * (extent_ / ny_);
  return (2.0 * extent_ / (nx_ - 1)) * (2.0 * extent_ / (ny_ - 1));
}

bool IsothermalChart::inside(double x, double y) const {
  if (kind_ == DomainKind::Torus) return true;
  return x * x + y * y <= extent_ * extent_ * (1.0 + 1e-14);
}

grid::RGrid IsothermalChart::sample(const expr::Expr& e) const {
  grid::RGrid out(nx_, ny_, 0.0);
  expr::Tape t(e);
  for (int j = 0; j < ny_; ++j)
    for (int i = 0; i < nx_; ++i)
      if (node_inside(i, j)) out.at(i, j) = t(x_of(i), y_of(j));
  return out;
}

double IsothermalChart::periodicity_defect(const expr::Expr& e) const {
  if (kind_ != DomainKind::Torus) return 0.0;
  expr::Tape t(e);
  double L = extent_, worst = 0.0;
  int n = std::max(nx_, ny_);
  for (int k = 0; k < n; ++k) {
    double xs = L * k / n, ys = L * k / n;
    worst = std::max(worst, std::abs(t(0.0, ys) - t(L, ys)));
    worst = std::max(worst, std::abs(t(xs, 0.0) - t(xs, L)));
  }
  return worst;
}

void IsothermalChart::require_periodic(const expr::Expr& e, const std::string& what) const {
  double d = periodicity_defect(e);
  if (d > 1e-12)
    throw ConfigError(what + " is not periodic on the torus (seam defect " + std::to_string(d) +
                      ")");
}

ExternalField::ExternalField() : ExternalField(expr::constant(0.0), expr::constant(0.0)) {}

ExternalField::ExternalField(expr::Expr e1, expr::Expr e2) : e1_(std::move(e1)), e2_(std::move(e2)) {
  e1_x_ = expr::differentiate(e1_, expr::Var::X);
  e1_y_ = expr::differentiate(e1_, expr::Var::Y);
  e2_x_ = expr::differentiate(e2_, expr::Var::X);
  e2_y_ = expr::differentiate(e2_, expr::Var::Y);
}

ExternalField ExternalField::parse(const std::string& e1_src, const std::string& e2_src) {
  return ExternalField(expr::parse(e1_src), expr::parse(e2_src));
}

void ExternalField::validate_on(const IsothermalChart& chart) const {
  if (chart.is_torus()) {
    chart.require_periodic(e1_, "E1");
    chart.require_periodic(e2_, "E2");
  }
}

std::pair<ChartPtr, ExternalField> conformal_rescale(const ChartPtr& chart,
                                                     const ExternalField& field,
                                                     const expr::Expr& sigma) {
  auto rescaled = std::make_shared<IsothermalChart>(chart->kind(), chart->extent(),
                                                    chart->rho() + sigma, chart->nx(), chart->ny(),
                                                    chart->nphi());
  expr::Expr damp = call(expr::Fn::Exp, expr::constant(-2.0) * sigma);
  ExternalField scaled(damp * field.e1(), damp * field.e2());
  return {rescaled, scaled};
}

}  // namespace thermoray::geom
