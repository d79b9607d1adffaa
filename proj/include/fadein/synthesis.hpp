#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "fadein/error.hpp"
#include "fadein/filterbank.hpp"
#include "fadein/rng.hpp"
#include "fadein/types.hpp"

namespace fadein {

/// Piecewise-linear interpolation between window centers, held flat before
/// the first and after the last center.
inline std::vector<double> upsample_envelope(std::span<const double> envelope,
                                             std::size_t window_len, std::size_t length) {
  std::vector<double> out(length, 0.0);
  if (envelope.empty()) return out;
  const double w = static_cast<double>(window_len);
  const double first = 0.5 * w - 0.5;
  const std::size_t last_idx = envelope.size() - 1;
  for (std::size_t i = 0; i < length; ++i) {
    const double pos = (static_cast<double>(i) - first) / w;
    if (pos <= 0.0) {
      out[i] = envelope.front();
    } else if (pos >= static_cast<double>(last_idx)) {
      out[i] = envelope.back();
    } else {
      const auto m = static_cast<std::size_t>(pos);
      const double frac = pos - static_cast<double>(m);
      out[i] = envelope[m] + frac * (envelope[m + 1] - envelope[m]);
    }
  }
  return out;
}

/// Octave-band RIR: envelope times band-limited, unit-RMS Gaussian noise.
/// `length` defaults to envelope size * window_len.
inline Rir synth_band(std::span<const double> envelope, double band_center,
                      std::size_t window_len, int sample_rate, std::uint64_t seed,
                      std::size_t length = 0) {
  for (double v : envelope) {
    if (v < 0.0 || !std::isfinite(v)) {
      throw Error(ErrorCode::kDomain, "envelope values must be finite and nonnegative");
    }
  }
  if (window_len == 0) throw Error(ErrorCode::kInvalidWindow, "window length must be positive");
  if (length == 0) length = envelope.size() * window_len;

  std::vector<double> noise(length);
  GaussianSource gauss(seed);
  for (double& v : noise) v = gauss();
  const auto filter = OctaveBandFilter::design(band_center, sample_rate);
  noise = filter.filtfilt(noise);
  double energy = 0.0;
  for (double v : noise) energy += v * v;
  const double rms = std::sqrt(energy / static_cast<double>(length));
  const double gain = rms > 0.0 ? 1.0 / rms : 0.0;

  const auto env = upsample_envelope(envelope, window_len, length);
  Rir out;
  out.sample_rate = sample_rate;
  out.band = band_center;
  out.samples.resize(length);
  for (std::size_t i = 0; i < length; ++i) out.samples[i] = env[i] * gain * noise[i];
  return out;
}

/// Sum of octave-band RIRs.
inline Rir synth_broadband(std::span<const Rir> band_rirs) {
  Rir out;
  if (band_rirs.empty()) return out;
  out.sample_rate = band_rirs.front().sample_rate;
  out.position_id = band_rirs.front().position_id;
  out.samples.assign(band_rirs.front().size(), 0.0);
  for (const Rir& b : band_rirs) {
    if (b.size() != out.size() || b.sample_rate != out.sample_rate) {
      throw Error(ErrorCode::kShape, "band RIRs differ in length or sample rate");
    }
    for (std::size_t i = 0; i < b.size(); ++i) out.samples[i] += b.samples[i];
  }
  return out;
}

}  // namespace fadein
