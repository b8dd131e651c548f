// Reproducible random inputs. The generator is the C++ standard
// mt19937_64 (fully specified by the standard, so seeds reproduce across
// platforms); uniforms are derived by the fixed 53-bit construction
// (x >> 11) * 2^-53 rather than distribution objects, whose output is
// implementation-defined.
#pragma once

#include <cstdint>
#include <random>

#include "thermoray/phase.hpp"

namespace thermoray::rng {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform() { return (gen_() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  int uniform_int(int n) { return static_cast<int>(gen_() % static_cast<std::uint64_t>(n)); }
  std::uint64_t raw() { return gen_(); }

  static const char* generator_name() { return "mt19937_64"; }

 private:
  std::mt19937_64 gen_;
};

// Random real trig polynomial of degree <= deg on the periodic square
// [0,L)^2, coefficients uniform in [-amplitude, amplitude] scaled by
// 1/(number of terms).
expr::Expr random_trig_poly(Rng& rng, double L, int deg, double amplitude);

// Random complex trig polynomial (independent re/im parts).
phase::ComplexExpr random_complex_trig(Rng& rng, double L, int deg, double amplitude);

// Random bandlimited phase function on a torus chart: modes |k| <= phi_deg,
// each coefficient a complex trig polynomial of spatial degree <= spatial_deg.
phase::PhaseFunction random_bandlimited(Rng& rng, const geom::ChartPtr& chart, int phi_deg,
                                        int spatial_deg, double amplitude);

// Same restricted to |k| in [k_low, phi_deg].
phase::PhaseFunction random_bandlimited_from(Rng& rng, const geom::ChartPtr& chart, int k_low,
                                             int phi_deg, int spatial_deg, double amplitude);

// Random polynomial of total degree <= deg (coefficients in [-a, a]).
expr::Expr random_polynomial(Rng& rng, int deg, double amplitude);

// Interior-supported test function on a disk chart: per mode, a random
// polynomial times the Gaussian envelope exp(-beta r^2) with beta chosen so
// the samples at radius r_support are below 1e-13 relative.
phase::PhaseFunction random_interior_supported(Rng& rng, const geom::ChartPtr& chart, int phi_deg,
                                               int poly_deg, double amplitude,
                                               double r_support_frac = 0.8);

}  // namespace thermoray::rng
