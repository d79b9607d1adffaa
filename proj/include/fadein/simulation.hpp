#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fadein/convolve.hpp"
#include "fadein/error.hpp"
#include "fadein/rng.hpp"
#include "fadein/types.hpp"

namespace fadein {

/// A path through statistically modelled rooms. Each room contributes an
/// exponentially decaying white Gaussian noise response exp(-delta t) n(t).
struct RoomChain {
  std::vector<double> decay_rates;  // 1/s, amplitude decay
  std::size_t length = 0;           // samples
  int sample_rate = 48000;
  std::uint64_t seed = 0;

  void validate() const {
    if (decay_rates.empty()) {
      throw Error(ErrorCode::kInvalidParameter, "room chain needs at least one room");
    }
    if (length == 0 || sample_rate <= 0) {
      throw Error(ErrorCode::kInvalidParameter, "length and sample rate must be positive");
    }
    for (double d : decay_rates) {
      if (!(d > 0.0) || !std::isfinite(d)) {
        throw Error(ErrorCode::kInvalidParameter, "decay rates must be positive");
      }
    }
  }
};

/// Seed of room `index` in a chain: the chain seed itself for the first room.
inline std::uint64_t room_seed(std::uint64_t chain_seed, std::size_t index) {
  return index == 0 ? chain_seed : derive_seed(chain_seed, index);
}

inline Rir gen_room_response(double delta, std::size_t length, int sample_rate,
                             std::uint64_t seed) {
  if (!(delta > 0.0) || !std::isfinite(delta)) {
    throw Error(ErrorCode::kInvalidParameter, "decay rate must be positive");
  }
  if (sample_rate <= 0) {
    throw Error(ErrorCode::kInvalidParameter, "sample rate must be positive");
  }
  Rir rir;
  rir.sample_rate = sample_rate;
  rir.samples.resize(length);
  GaussianSource noise(seed);
  const double step = std::exp(-delta / sample_rate);
  double env = 1.0;
  for (std::size_t t = 0; t < length; ++t) {
    rir.samples[t] = env * noise();
    env *= step;
  }
  return rir;
}

/// Room-to-room response: convolution of the rooms' responses, truncated to
/// the chain length.
inline Rir chain_response(const RoomChain& chain) {
  chain.validate();
  Rir out = gen_room_response(chain.decay_rates[0], chain.length, chain.sample_rate,
                              room_seed(chain.seed, 0));
  for (std::size_t i = 1; i < chain.decay_rates.size(); ++i) {
    const Rir next = gen_room_response(chain.decay_rates[i], chain.length, chain.sample_rate,
                                       room_seed(chain.seed, i));
    out.samples = convolve_truncated(out.samples, next.samples, chain.length);
  }
  return out;
}

namespace detail {

inline void check_distinct_rates(std::span<const double> rates) {
  if (rates.empty()) throw Error(ErrorCode::kInvalidParameter, "no decay rates");
  for (double d : rates) {
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw Error(ErrorCode::kInvalidParameter, "decay rates must be positive");
    }
  }
  for (std::size_t i = 0; i < rates.size(); ++i) {
    for (std::size_t j = i + 1; j < rates.size(); ++j) {
      if (std::abs(rates[i] - rates[j]) <= 1e-9 * std::max(rates[i], rates[j])) {
        throw Error(ErrorCode::kNearSingular,
                    "coincident decay rates; perturb them slightly (confluent case unsupported)");
      }
    }
  }
}

}  // namespace detail

/// Convolution of the deterministic envelopes exp(-delta_i t), in partial
/// fractions: sum_i [prod_{j != i} 1 / (delta_j - delta_i)] exp(-delta_i t).
/// Zero for t < 0.
inline std::vector<double> analytic_envelope(std::span<const double> decay_rates,
                                             std::span<const double> times_s) {
  detail::check_distinct_rates(decay_rates);
  std::vector<double> coef(decay_rates.size(), 1.0);
  for (std::size_t i = 0; i < decay_rates.size(); ++i) {
    for (std::size_t j = 0; j < decay_rates.size(); ++j) {
      if (j != i) coef[i] /= decay_rates[j] - decay_rates[i];
    }
  }
  std::vector<double> out(times_s.size(), 0.0);
  for (std::size_t n = 0; n < times_s.size(); ++n) {
    const double t = times_s[n];
    if (t < 0.0) continue;
    double v = 0.0;
    for (std::size_t i = 0; i < decay_rates.size(); ++i) {
      v += coef[i] * std::exp(-decay_rates[i] * t);
    }
    out[n] = std::max(v, 0.0);
  }
  return out;
}

/// Expected RMS of chain_response at each time: the energy envelope of a
/// convolution of independent white-noise rooms is the convolution of the
/// energy envelopes exp(-2 delta_i t), i.e. fs^(k-1) * analytic_envelope(2 delta).
inline std::vector<double> expected_rms_envelope(std::span<const double> decay_rates,
                                                 std::span<const double> times_s,
                                                 int sample_rate) {
  std::vector<double> doubled(decay_rates.begin(), decay_rates.end());
  for (double& d : doubled) d *= 2.0;
  auto energy = analytic_envelope(doubled, times_s);
  const double gain = std::pow(static_cast<double>(sample_rate),
                               static_cast<double>(decay_rates.size()) - 1.0);
  for (double& e : energy) e = std::sqrt(gain * e);
  return energy;
}

/// Decay rates of the three-room preset: R2 most reverberant, R1 least,
/// R3 in between (absorption 0.01 / 0.2 / 0.1).
struct ThreeRoomPreset {
  static constexpr double kRoom1 = 30.0;
  static constexpr double kRoom2 = 6.0;
  static constexpr double kRoom3 = 14.0;

  /// Rooms traversed from the source (in R1) to a receiver in room 1, 2 or 3.
  static std::vector<double> path_to(int room) {
    switch (room) {
      case 1: return {kRoom1};
      case 2: return {kRoom1, kRoom2};
      case 3: return {kRoom1, kRoom2, kRoom3};
    }
    throw Error(ErrorCode::kInvalidParameter, "preset has rooms 1-3");
  }
};

}  // namespace fadein
