// Isothermal charts g = e^{2 rho}(dx^2 + dy^2) on a periodic square (torus)
// or a round disk, plus the external field driving the thermostat.
#pragma once

#include <memory>
#include <stdexcept>
#include <string>

#include "thermoray/expr.hpp"
#include "thermoray/grid.hpp"

namespace thermoray::geom {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when an operation's mathematical hypotheses are violated
// (wrong domain kind, missing boundary vanishing, unsupported Fourier
// support, non-simple configuration, ...).
struct HypothesisError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class DomainKind { Torus, Disk };

// Chart of the surface. Torus: periodic square [0,L)^2, grid x_i = i L/nx
// (no duplicated seam). Disk: {x^2+y^2 <= R^2} sampled on the bounding
// square [-R,R]^2 with inclusive endpoints and an inside mask.
class IsothermalChart {
 public:
  IsothermalChart(DomainKind kind, double extent, expr::Expr rho, int nx, int ny, int nphi);

  static std::shared_ptr<const IsothermalChart> torus(double L, const std::string& rho_src,
                                                      int nx, int ny, int nphi);
  static std::shared_ptr<const IsothermalChart> disk(double R, const std::string& rho_src,
                                                     int nx, int ny, int nphi);

  DomainKind kind() const { return kind_; }
  bool is_torus() const { return kind_ == DomainKind::Torus; }
  double extent() const { return extent_; }  // L or R
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int nphi() const { return nphi_; }
  int kmax() const { return (nphi_ - 1) / 2; }

  const expr::Expr& rho() const { return rho_; }
  const expr::Expr& rho_x() const { return rho_x_; }
  const expr::Expr& rho_y() const { return rho_y_; }
  const expr::Expr& rho_xx() const { return rho_xx_; }
  const expr::Expr& rho_yy() const { return rho_yy_; }

  double x_of(int i) const;
  double y_of(int j) const;
  double cell_area() const;
  bool inside(double x, double y) const;
  bool node_inside(int i, int j) const { return mask_.at(i, j) > 0.5; }

  // Trapezoid weight of node (i,j) including the domain mask.
  double quad_weight(int i, int j) const { return weights_.at(i, j); }

  // Samples an expression over the grid (masked-out nodes get 0).
  grid::RGrid sample(const expr::Expr& e) const;
  const grid::RGrid& e2rho() const { return e2rho_; }  // conformal area factor

  // Torus: largest |f(x,y) - f(x+L,y)| / |f(x,y) - f(x,y+L)| over seam pairs.
  double periodicity_defect(const expr::Expr& e) const;
  void require_periodic(const expr::Expr& e, const std::string& what) const;

 private:
  DomainKind kind_;
  double extent_;
  expr::Expr rho_, rho_x_, rho_y_, rho_xx_, rho_yy_;
  int nx_, ny_, nphi_;
  grid::RGrid mask_, weights_, e2rho_;
};

using ChartPtr = std::shared_ptr<const IsothermalChart>;

// Coordinate components (E^1, E^2) of the external field.
class ExternalField {
 public:
  ExternalField();  // E = 0
  ExternalField(expr::Expr e1, expr::Expr e2);
  static ExternalField parse(const std::string& e1_src, const std::string& e2_src);

  const expr::Expr& e1() const { return e1_; }
  const expr::Expr& e2() const { return e2_; }
  const expr::Expr& e1_x() const { return e1_x_; }
  const expr::Expr& e1_y() const { return e1_y_; }
  const expr::Expr& e2_x() const { return e2_x_; }
  const expr::Expr& e2_y() const { return e2_y_; }

  void validate_on(const IsothermalChart& chart) const;

 private:
  expr::Expr e1_, e2_, e1_x_, e1_y_, e2_x_, e2_y_;
};

// Conformal rescale (g, E) -> (e^{2 sigma} g, e^{-2 sigma} E) on the same
// coordinates; returns the rescaled chart and field.
std::pair<ChartPtr, ExternalField> conformal_rescale(const ChartPtr& chart,
                                                     const ExternalField& field,
                                                     const expr::Expr& sigma);

}  // namespace thermoray::geom
