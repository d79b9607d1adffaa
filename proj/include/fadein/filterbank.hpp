#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "fadein/error.hpp"
#include "fadein/types.hpp"

namespace fadein {

inline std::vector<double> default_band_centers() {
  return {125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0};
}

struct Biquad {
  // b0 + b1 z^-1 + b2 z^-2 over 1 + a1 z^-1 + a2 z^-2.
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;

  std::complex<double> response(std::complex<double> z) const {
    const auto zi = 1.0 / z;
    return (b0 + zi * (b1 + zi * b2)) / (1.0 + zi * (a1 + zi * a2));
  }
};

/// 4th-order Butterworth band-pass as two biquads. Band edges sit at
/// center/sqrt(2) and center*sqrt(2).
struct OctaveBandFilter {
  double center_hz = 0.0;
  int sample_rate = 0;
  std::array<Biquad, 2> sections;

  static OctaveBandFilter design(double center_hz, int sample_rate) {
    const double fs = sample_rate;
    const double f_lo = center_hz / std::numbers::sqrt2;
    const double f_hi = center_hz * std::numbers::sqrt2;
    if (!(center_hz > 0.0) || f_hi >= fs / 2.0) {
      throw Error(ErrorCode::kInvalidBand,
                  "band " + std::to_string(center_hz) + " Hz has upper edge at or above Nyquist");
    }

    // Pre-warped analog edges, then low-pass prototype -> band-pass -> bilinear.
    const double w_lo = 2.0 * fs * std::tan(std::numbers::pi * f_lo / fs);
    const double w_hi = 2.0 * fs * std::tan(std::numbers::pi * f_hi / fs);
    const double w0_sq = w_lo * w_hi;
    const double bw = w_hi - w_lo;

    using cd = std::complex<double>;
    const cd proto = std::polar(1.0, 3.0 * std::numbers::pi / 4.0);
    const cd disc = std::sqrt(proto * proto * bw * bw - 4.0 * w0_sq);
    const std::array<cd, 2> analog = {(proto * bw + disc) / 2.0, (proto * bw - disc) / 2.0};

    OctaveBandFilter f;
    f.center_hz = center_hz;
    f.sample_rate = sample_rate;
    for (std::size_t i = 0; i < 2; ++i) {
      const cd z = (2.0 * fs + analog[i]) / (2.0 * fs - analog[i]);
      Biquad& s = f.sections[i];
      s.b0 = 1.0;
      s.b1 = 0.0;
      s.b2 = -1.0;
      s.a1 = -2.0 * z.real();
      s.a2 = std::norm(z);
    }

    const double w_center = 2.0 * std::atan(std::sqrt(w0_sq) / (2.0 * fs));
    const double gain = 1.0 / std::abs(f.response(w_center));
    f.sections[0].b0 *= gain;
    f.sections[0].b2 *= gain;
    return f;
  }

  /// Complex response at normalized angular frequency omega (rad/sample) for
  /// a single forward pass.
  std::complex<double> response(double omega) const {
    const auto z = std::polar(1.0, omega);
    return sections[0].response(z) * sections[1].response(z);
  }

  /// Magnitude of the zero-phase (forward-backward) response at `hz`.
  double zero_phase_gain(double hz) const {
    const double omega = 2.0 * std::numbers::pi * hz / sample_rate;
    return std::norm(response(omega));
  }

  void filter_in_place(std::span<double> x) const {
    for (const Biquad& s : sections) {
      double z1 = 0.0, z2 = 0.0;
      for (double& v : x) {
        const double in = v;
        const double out = s.b0 * in + z1;
        z1 = s.b1 * in - s.a1 * out + z2;
        z2 = s.b2 * in - s.a2 * out;
        v = out;
      }
    }
  }

  /// Forward-backward filtering; output has the input's length and no group delay.
  std::vector<double> filtfilt(std::span<const double> x) const {
    std::vector<double> y(x.begin(), x.end());
    filter_in_place(y);
    std::reverse(y.begin(), y.end());
    filter_in_place(y);
    std::reverse(y.begin(), y.end());
    return y;
  }
};

inline void validate_band_centers(std::span<const double> centers, int sample_rate) {
  for (std::size_t i = 0; i < centers.size(); ++i) {
    if (i > 0 && !(centers[i] > centers[i - 1])) {
      throw Error(ErrorCode::kInvalidBand, "band centers must be strictly increasing");
    }
    if (!(centers[i] > 0.0) || centers[i] * std::numbers::sqrt2 >= sample_rate / 2.0) {
      throw Error(ErrorCode::kInvalidBand,
                  "band " + std::to_string(centers[i]) + " Hz has upper edge at or above Nyquist");
    }
  }
}

/// Splits `rir` into zero-phase octave bands. Each output carries its band tag.
inline std::vector<Rir> octave_filterbank(const Rir& rir, std::span<const double> band_centers) {
  validate_band_centers(band_centers, rir.sample_rate);
  std::vector<Rir> out;
  out.reserve(band_centers.size());
  for (double c : band_centers) {
    const auto filter = OctaveBandFilter::design(c, rir.sample_rate);
    Rir band{filter.filtfilt(rir.samples), rir.sample_rate, rir.position_id, c};
    out.push_back(std::move(band));
  }
  return out;
}

inline std::vector<Rir> octave_filterbank(const Rir& rir) {
  const auto centers = default_band_centers();
  return octave_filterbank(rir, centers);
}

}  // namespace fadein
