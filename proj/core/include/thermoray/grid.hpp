// Dense 2D sample grids (row index i along x, column index j along y) and a
// small FFT facade used by the periodic spectral paths.
#pragma once

#include <complex>
#include <vector>

namespace thermoray::grid {

using cplx = std::complex<double>;

template <typename T>
struct Grid2 {
  int nx = 0, ny = 0;
  std::vector<T> a;

  Grid2() = default;
  Grid2(int nx_, int ny_, T fill = T{}) : nx(nx_), ny(ny_), a(static_cast<std::size_t>(nx_) * ny_, fill) {}

  T& at(int i, int j) { return a[static_cast<std::size_t>(j) * nx + i]; }
  const T& at(int i, int j) const { return a[static_cast<std::size_t>(j) * nx + i]; }
  std::size_t size() const { return a.size(); }
  bool same_shape(const Grid2& o) const { return nx == o.nx && ny == o.ny; }
};

using RGrid = Grid2<double>;
using CGrid = Grid2<cplx>;

// In-place 2D DFT, sign = -1 forward / +1 inverse. The inverse is scaled by
// 1/(nx*ny) so fft2(fft2(g,-1),+1) round-trips. Plans are cached per shape;
// execution is thread-safe on distinct arrays.
void fft2(CGrid& g, int sign);

// Spectral partial derivatives of a periodic grid sampled on [0,L)^2 at
// x_i = i L/nx. Exact for trig polynomials below the Nyquist degree.
CGrid spectral_ddx(const CGrid& g, double L);
CGrid spectral_ddy(const CGrid& g, double L);

// Solves lap(u) = rhs on the periodic square [0,L)^2 (flat Laplacian),
// projecting out the mean; returns the zero-mean solution.
CGrid spectral_poisson(const CGrid& rhs, double L);

}  // namespace thermoray::grid
