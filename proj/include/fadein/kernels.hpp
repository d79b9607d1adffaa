#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "fadein/error.hpp"

namespace fadein {

// Decay-time convention used throughout the library: a decay time T is the
// parameter of the kernel exp(ln(1e-6) t / (fs T)), i.e. the time at which the
// kernel has dropped to 1e-6. Applied to amplitude envelopes this is twice the
// conventional (energy) T60.
inline const double kKernelLogFloor = std::log(1e-6);

inline double decay_kernel(double decay_time_s, double t_samples, double sample_rate) {
  return std::exp(kKernelLogFloor * t_samples / (sample_rate * decay_time_s));
}

inline double kernel_time_from_t60(double t60_s) { return 2.0 * t60_s; }
inline double t60_from_kernel_time(double kernel_time_s) { return 0.5 * kernel_time_s; }

/// Amplitude decay rate delta (1/s) of exp(-delta t) to kernel time.
inline double kernel_time_from_decay_rate(double delta) { return -kKernelLogFloor / delta; }
inline double decay_rate_from_kernel_time(double kernel_time_s) {
  return -kKernelLogFloor / kernel_time_s;
}

struct BandKernels {
  std::vector<double> common_times;  // seconds, ascending
  Eigen::MatrixXd matrix;            // envelope_len x (K + 1); column 0 is the noise term

  std::size_t num_decays() const noexcept { return common_times.size(); }
};

struct DecayKernelSet {
  std::vector<BandKernels> bands;
  std::size_t envelope_len = 0;
  std::size_t window_len = 0;
  int sample_rate = 48000;

  std::size_t num_bands() const noexcept { return bands.size(); }

  /// Time of envelope point m in samples (window center).
  double time_samples(std::size_t m) const noexcept {
    return (static_cast<double>(m) + 0.5) * static_cast<double>(window_len);
  }
};

inline BandKernels build_band_kernels(std::span<const double> common_times,
                                      std::size_t envelope_len, std::size_t window_len,
                                      int sample_rate) {
  BandKernels bk;
  bk.common_times.assign(common_times.begin(), common_times.end());
  for (std::size_t k = 0; k < bk.common_times.size(); ++k) {
    const double t = bk.common_times[k];
    if (!(t > 0.0) || !std::isfinite(t)) {
      throw Error(ErrorCode::kInvalidParameter,
                  "decay times must be positive, got " + std::to_string(t));
    }
    if (k > 0 && !(t > bk.common_times[k - 1])) {
      throw Error(ErrorCode::kInvalidParameter, "decay times must be strictly ascending");
    }
  }
  const auto n = static_cast<Eigen::Index>(envelope_len);
  const auto cols = static_cast<Eigen::Index>(bk.common_times.size()) + 1;
  bk.matrix.resize(n, cols);
  for (Eigen::Index m = 0; m < n; ++m) {
    const double t = (static_cast<double>(m) + 0.5) * static_cast<double>(window_len);
    bk.matrix(m, 0) = 1.0;
    for (Eigen::Index k = 1; k < cols; ++k) {
      bk.matrix(m, k) =
          decay_kernel(bk.common_times[static_cast<std::size_t>(k - 1)], t, sample_rate);
    }
  }
  return bk;
}

/// Evaluates the decay kernels of every band on the envelope time grid.
inline DecayKernelSet build_kernels(const std::vector<std::vector<double>>& common_times,
                                    std::size_t envelope_len, std::size_t window_len,
                                    int sample_rate) {
  if (sample_rate <= 0 || window_len == 0) {
    throw Error(ErrorCode::kInvalidParameter, "sample rate and window length must be positive");
  }
  DecayKernelSet set;
  set.envelope_len = envelope_len;
  set.window_len = window_len;
  set.sample_rate = sample_rate;
  for (const auto& times : common_times) {
    set.bands.push_back(build_band_kernels(times, envelope_len, window_len, sample_rate));
  }
  return set;
}

}  // namespace fadein
