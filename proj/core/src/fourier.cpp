#include "lamod/fourier.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <utility>

namespace lamod {

namespace {

struct FftwBuffer {
  explicit FftwBuffer(std::size_t bytes) : ptr(fftw_malloc(bytes)) {}
  ~FftwBuffer() { fftw_free(ptr); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  void* ptr;
};

struct Plans {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

// The FFTW planner is not re-entrant; executing an existing plan on new
// arrays is. Plans are created once per grid shape under a lock.
Plans plans_for(int h, int w) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, Plans> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find({h, w});
  if (it != cache.end()) return it->second;
  const std::size_t nr = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  const std::size_t nc = static_cast<std::size_t>(h) * static_cast<std::size_t>(w / 2 + 1);
  FftwBuffer real(sizeof(double) * nr);
  FftwBuffer spec(sizeof(fftw_complex) * nc);
  Plans p;
  p.forward = fftw_plan_dft_r2c_2d(h, w, static_cast<double*>(real.ptr), static_cast<fftw_complex*>(spec.ptr),
                                   FFTW_ESTIMATE);
  p.inverse = fftw_plan_dft_c2r_2d(h, w, static_cast<fftw_complex*>(spec.ptr), static_cast<double*>(real.ptr),
                                   FFTW_ESTIMATE);
  cache.emplace(std::make_pair(h, w), p);
  return p;
}

}  // namespace

void fourier_multiply(std::span<const double> in, const Grid2& g, std::span<const double> mult,
                      std::span<double> out) {
  const int h = g.height, w = g.width, wc = w / 2 + 1;
  const std::size_t nr = g.size();
  const std::size_t nc = static_cast<std::size_t>(h) * static_cast<std::size_t>(wc);
  const Plans plans = plans_for(h, w);

  FftwBuffer real(sizeof(double) * nr);
  FftwBuffer spec(sizeof(fftw_complex) * nc);
  auto* r = static_cast<double*>(real.ptr);
  auto* c = static_cast<fftw_complex*>(spec.ptr);

  std::copy(in.begin(), in.end(), r);
  fftw_execute_dft_r2c(plans.forward, r, c);
  const double norm = 1.0 / static_cast<double>(nr);
  for (int ky = 0; ky < h; ++ky) {
    for (int kx = 0; kx < wc; ++kx) {
      const double m = mult[g.index(ky, kx)] * norm;
      fftw_complex& z = c[static_cast<std::size_t>(ky) * static_cast<std::size_t>(wc) + static_cast<std::size_t>(kx)];
      z[0] *= m;
      z[1] *= m;
    }
  }
  fftw_execute_dft_c2r(plans.inverse, c, r);
  std::copy(r, r + nr, out.begin());
}

}  // namespace lamod
