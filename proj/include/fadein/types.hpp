#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "fadein/error.hpp"

namespace fadein {

/// A sampled impulse response. `band` is the octave-band center in Hz, or
/// empty for a broadband signal.
struct Rir {
  std::vector<double> samples;
  int sample_rate = 48000;
  std::string position_id;
  std::optional<double> band;

  std::size_t size() const noexcept { return samples.size(); }
  double duration() const noexcept {
    return static_cast<double>(samples.size()) / sample_rate;
  }

  void validate() const {
    if (sample_rate <= 0) {
      throw Error(ErrorCode::kInvalidParameter, "sample_rate must be positive");
    }
    for (double v : samples) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::kDomain, "RIR '" + position_id + "' contains non-finite samples");
      }
    }
  }
};

/// Downsampled short-term RMS envelopes, one row per octave band. Point m
/// sits at the center of the m-th non-overlapping window.
struct BandedEnvelope {
  std::vector<std::vector<double>> values;
  std::vector<double> band_centers;
  std::size_t window_len = 0;
  int sample_rate = 48000;
  std::string position_id;

  std::size_t hop() const noexcept { return window_len; }
  std::size_t num_bands() const noexcept { return values.size(); }
  std::size_t length() const noexcept { return values.empty() ? 0 : values.front().size(); }

  /// Envelope point time in samples.
  double time_samples(std::size_t m) const noexcept {
    return (static_cast<double>(m) + 0.5) * static_cast<double>(window_len);
  }
};

/// Energy decay function (backward-integrated energy).
struct Edf {
  std::vector<double> values;
  bool normalized = false;

  std::size_t size() const noexcept { return values.size(); }
};

}  // namespace fadein
