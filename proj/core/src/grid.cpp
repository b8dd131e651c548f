#include "thermoray/grid.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace thermoray::grid {

namespace {

std::mutex plan_mutex;

fftw_plan get_plan(int nx, int ny, int sign) {
  static std::map<std::tuple<int, int, int>, fftw_plan> cache;
  std::lock_guard<std::mutex> lk(plan_mutex);
  auto key = std::make_tuple(nx, ny, sign);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  // FFTW_UNALIGNED lets the plan execute on any caller buffer via
  // fftw_execute_dft; FFTW_ESTIMATE keeps planning deterministic.
  std::vector<cplx> proto(static_cast<std::size_t>(nx) * ny);
  // our layout is x-fastest, i.e. row index i along x: dims (ny, nx) for FFTW
  fftw_plan p = fftw_plan_dft_2d(ny, nx, reinterpret_cast<fftw_complex*>(proto.data()),
                                 reinterpret_cast<fftw_complex*>(proto.data()), sign,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!p) throw std::runtime_error("fftw planning failed");
  cache.emplace(key, p);
  return p;
}

}  // namespace

void fft2(CGrid& g, int sign) {
  if (g.nx <= 0 || g.ny <= 0) throw std::invalid_argument("fft2: empty grid");
  fftw_plan p = get_plan(g.nx, g.ny, sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD);
  auto* data = reinterpret_cast<fftw_complex*>(g.a.data());
  fftw_execute_dft(p, data, data);
  if (sign > 0) {
    double scale = 1.0 / (static_cast<double>(g.nx) * g.ny);
    for (auto& v : g.a) v *= scale;
  }
}

namespace {

inline int wavenumber(int idx, int n) { return idx <= n / 2 ? idx : idx - n; }

CGrid spectral_apply(const CGrid& g, double L, bool along_x) {
  CGrid f = g;
  fft2(f, -1);
  const double scale = 2.0 * M_PI / L;
  for (int j = 0; j < f.ny; ++j) {
    for (int i = 0; i < f.nx; ++i) {
      int k = along_x ? wavenumber(i, f.nx) : wavenumber(j, f.ny);
      // drop the unmatched Nyquist mode of even grids (its derivative is
      // not representable); harmless for bandlimited data
      if (along_x && f.nx % 2 == 0 && i == f.nx / 2) k = 0;
      if (!along_x && f.ny % 2 == 0 && j == f.ny / 2) k = 0;
      f.at(i, j) *= cplx(0.0, k * scale);
    }
  }
  fft2(f, +1);
  return f;
}

}  // namespace

CGrid spectral_ddx(const CGrid& g, double L) { return spectral_apply(g, L, true); }
CGrid spectral_ddy(const CGrid& g, double L) { return spectral_apply(g, L, false); }

CGrid spectral_poisson(const CGrid& rhs, double L) {
  CGrid f = rhs;
  fft2(f, -1);
  const double scale = 2.0 * M_PI / L;
  for (int j = 0; j < f.ny; ++j) {
    for (int i = 0; i < f.nx; ++i) {
      int kx = wavenumber(i, f.nx);
      int ky = wavenumber(j, f.ny);
      double k2 = scale * scale * (static_cast<double>(kx) * kx + static_cast<double>(ky) * ky);
      if (kx == 0 && ky == 0) {
        f.at(i, j) = 0.0;  // mean projected out
      } else {
        f.at(i, j) /= -k2;
      }
    }
  }
  fft2(f, +1);
  return f;
}

}  // namespace thermoray::grid
