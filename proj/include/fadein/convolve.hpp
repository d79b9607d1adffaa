#pragma once

#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

namespace fadein {

namespace detail {

// FFTW's planner is not reentrant; execution on distinct buffers is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <typename T>
FftwBuffer<T> fftw_buffer(std::size_t n) {
  return FftwBuffer<T>(static_cast<T*>(fftw_malloc(sizeof(T) * n)));
}

// ESTIMATE plans for one transform size, created once and executed on
// thread-local buffers through the new-array interface.
struct FftwPlans {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

struct Workspace {
  std::size_t n = 0;
  FftwBuffer<double> ra, rb;
  FftwBuffer<fftw_complex> ca, cb;
};

inline const FftwPlans& plans_for(std::size_t n) {
  static std::map<std::size_t, FftwPlans> cache;
  std::lock_guard lock(fftw_planner_mutex());
  auto it = cache.find(n);
  if (it == cache.end()) {
    auto r = fftw_buffer<double>(n);
    auto c = fftw_buffer<fftw_complex>(n / 2 + 1);
    const int ni = static_cast<int>(n);
    FftwPlans p;
    p.forward = fftw_plan_dft_r2c_1d(ni, r.get(), c.get(), FFTW_ESTIMATE);
    p.inverse = fftw_plan_dft_c2r_1d(ni, c.get(), r.get(), FFTW_ESTIMATE);
    it = cache.emplace(n, p).first;
  }
  return it->second;
}

inline Workspace& workspace_for(std::size_t n) {
  thread_local Workspace ws;
  if (ws.n != n) {
    ws.n = n;
    ws.ra = fftw_buffer<double>(n);
    ws.rb = fftw_buffer<double>(n);
    ws.ca = fftw_buffer<fftw_complex>(n / 2 + 1);
    ws.cb = fftw_buffer<fftw_complex>(n / 2 + 1);
  }
  return ws;
}

/// Smallest 2^a 3^b 5^c that is at least n.
inline std::size_t fft_size_for(std::size_t n) {
  std::size_t best = 1;
  while (best < n) best <<= 1;
  for (std::size_t p5 = 1; p5 < best; p5 *= 5) {
    for (std::size_t p35 = p5; p35 < best; p35 *= 3) {
      std::size_t v = p35;
      while (v < n) v <<= 1;
      best = std::min(best, v);
    }
  }
  return best;
}

}  // namespace detail

/// Linear convolution of `a` and `b`, truncated to the first `out_len` samples.
inline std::vector<double> convolve_truncated(std::span<const double> a, std::span<const double> b,
                                              std::size_t out_len) {
  std::vector<double> out(out_len, 0.0);
  if (a.empty() || b.empty() || out_len == 0) return out;
  const std::size_t full = a.size() + b.size() - 1;
  const std::size_t needed = std::min(full, out_len);

  if (std::min(a.size(), b.size()) <= 32) {
    const auto& lng = a.size() >= b.size() ? a : b;
    const auto& sht = a.size() >= b.size() ? b : a;
    for (std::size_t j = 0; j < sht.size(); ++j) {
      for (std::size_t i = 0; i < lng.size() && i + j < needed; ++i) {
        out[i + j] += sht[j] * lng[i];
      }
    }
    return out;
  }

  // Only the first `needed` outputs are kept, so the inputs can be cut there.
  const std::size_t na = std::min(a.size(), needed);
  const std::size_t nb = std::min(b.size(), needed);
  const std::size_t n = detail::fft_size_for(na + nb - 1);
  const std::size_t nc = n / 2 + 1;
  const auto& plans = detail::plans_for(n);
  auto& ws = detail::workspace_for(n);
  double* ra = ws.ra.get();
  double* rb = ws.rb.get();
  fftw_complex* ca = ws.ca.get();
  fftw_complex* cb = ws.cb.get();
  std::fill(ra, ra + n, 0.0);
  std::fill(rb, rb + n, 0.0);
  std::copy(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(na), ra);
  std::copy(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(nb), rb);
  fftw_execute_dft_r2c(plans.forward, ra, ca);
  fftw_execute_dft_r2c(plans.forward, rb, cb);
  for (std::size_t i = 0; i < nc; ++i) {
    const std::complex<double> x(ca[i][0], ca[i][1]);
    const std::complex<double> y(cb[i][0], cb[i][1]);
    const auto z = x * y;
    ca[i][0] = z.real();
    ca[i][1] = z.imag();
  }
  fftw_execute_dft_c2r(plans.inverse, ca, ra);
  const double norm = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < needed; ++i) out[i] = ra[i] * norm;
  return out;
}

}  // namespace fadein
