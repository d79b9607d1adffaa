#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "fadein/error.hpp"
#include "fadein/filterbank.hpp"
#include "fadein/types.hpp"

namespace fadein {

inline constexpr double kPowerScaleFloor = 1e-12;
inline constexpr double kDefaultPowerFactor = 0.5;
inline constexpr std::size_t kDefaultEnvelopePoints = 200;

/// Window length giving roughly 200 envelope points for an RIR of `length` samples.
inline std::size_t default_window_len(std::size_t length) {
  const auto w = static_cast<std::size_t>(
      std::lround(static_cast<double>(length) / static_cast<double>(kDefaultEnvelopePoints)));
  return std::max<std::size_t>(w, 1);
}

/// Three-tap [0.25, 0.5, 0.25] smoother with replicated edges.
inline std::vector<double> smooth3(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double prev = x[i == 0 ? 0 : i - 1];
    const double next = x[i + 1 < n ? i + 1 : n - 1];
    y[i] = 0.25 * prev + 0.5 * x[i] + 0.25 * next;
  }
  return y;
}

/// Non-overlapping moving RMS followed by the three-tap low-pass. Output length
/// is floor(L / window_len).
inline std::vector<double> rms_envelope(std::span<const double> samples, std::size_t window_len) {
  if (samples.empty()) {
    throw Error(ErrorCode::kInvalidWindow, "empty signal");
  }
  if (window_len == 0 || window_len > samples.size()) {
    throw Error(ErrorCode::kInvalidWindow, "window length " + std::to_string(window_len) +
                                               " outside [1, " + std::to_string(samples.size()) +
                                               "]");
  }
  const std::size_t n = samples.size() / window_len;
  std::vector<double> rms(n);
  for (std::size_t m = 0; m < n; ++m) {
    double acc = 0.0;
    for (std::size_t i = m * window_len; i < (m + 1) * window_len; ++i) {
      acc += samples[i] * samples[i];
    }
    rms[m] = std::sqrt(acc / static_cast<double>(window_len));
  }
  return smooth3(rms);
}

inline std::vector<double> rms_envelope(const Rir& rir, std::size_t window_len) {
  return rms_envelope(rir.samples, window_len);
}

/// Filterbank + RMS envelope per band.
inline BandedEnvelope extract_envelopes(const Rir& rir, std::span<const double> band_centers,
                                        std::size_t window_len) {
  BandedEnvelope env;
  env.band_centers.assign(band_centers.begin(), band_centers.end());
  env.window_len = window_len;
  env.sample_rate = rir.sample_rate;
  env.position_id = rir.position_id;
  for (const Rir& band : octave_filterbank(rir, band_centers)) {
    env.values.push_back(rms_envelope(band, window_len));
  }
  return env;
}

/// Schroeder backward integration of the squared response.
inline Edf schroeder_edf(std::span<const double> samples, bool normalize) {
  if (samples.empty()) {
    throw Error(ErrorCode::kDegenerateInput, "empty RIR");
  }
  Edf edf;
  edf.values.resize(samples.size());
  double acc = 0.0;
  for (std::size_t i = samples.size(); i-- > 0;) {
    acc += samples[i] * samples[i];
    edf.values[i] = acc;
  }
  // The running sum is accumulated in one direction, so values are non-increasing.
  if (normalize) {
    const double total = edf.values.front();
    if (!(total > 0.0)) {
      throw Error(ErrorCode::kDegenerateInput, "cannot normalize the EDF of an all-zero RIR");
    }
    for (double& v : edf.values) v /= total;
    edf.values.front() = 1.0;
    edf.normalized = true;
  }
  return edf;
}

inline Edf schroeder_edf(const Rir& rir, bool normalize) {
  return schroeder_edf(rir.samples, normalize);
}

inline double power_scale(double value, double factor = kDefaultPowerFactor) {
  return std::pow(std::max(value, kPowerScaleFloor), factor);
}

/// Elementwise max(v, eps)^factor.
inline std::vector<double> power_scale(std::span<const double> values,
                                       double factor = kDefaultPowerFactor) {
  if (!(factor > 0.0 && factor <= 1.0)) {
    throw Error(ErrorCode::kDomain, "power factor must lie in (0, 1]");
  }
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] < 0.0) {
      throw Error(ErrorCode::kDomain, "power_scale input must be nonnegative");
    }
    out[i] = power_scale(values[i], factor);
  }
  return out;
}

inline double amplitude_to_db(double amplitude) { return 20.0 * std::log10(amplitude); }
inline double energy_to_db(double energy) { return 10.0 * std::log10(energy); }

}  // namespace fadein
