#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string>

#include "fadein/error.hpp"
#include "fadein/types.hpp"

namespace fadein {

/// RMS difference over points t >= skip_head.
inline double envelope_rmse(std::span<const double> fitted, std::span<const double> reference,
                            std::size_t skip_head = 0) {
  if (fitted.size() != reference.size()) {
    throw Error(ErrorCode::kShape, "envelopes differ in length (" + std::to_string(fitted.size()) +
                                       " vs " + std::to_string(reference.size()) + ")");
  }
  if (skip_head >= fitted.size()) {
    throw Error(ErrorCode::kInvalidParameter, "skip_head must be smaller than the envelope");
  }
  double acc = 0.0;
  for (std::size_t t = skip_head; t < fitted.size(); ++t) {
    const double d = reference[t] - fitted[t];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(fitted.size() - skip_head));
}

/// Index of the first late sample (50 ms boundary belongs to the late part).
inline std::size_t c50_boundary(int sample_rate) {
  return static_cast<std::size_t>(std::lround(0.05 * sample_rate));
}

/// Clarity C50 in dB; +infinity when the late part carries no energy.
inline double c50(const Rir& rir) {
  const std::size_t boundary = c50_boundary(rir.sample_rate);
  if (rir.size() < boundary) {
    throw Error(ErrorCode::kInvalidParameter, "RIR shorter than 50 ms");
  }
  double early = 0.0, late = 0.0;
  for (std::size_t i = 0; i < rir.size(); ++i) {
    const double e = rir.samples[i] * rir.samples[i];
    (i < boundary ? early : late) += e;
  }
  if (early == 0.0 && late == 0.0) {
    throw Error(ErrorCode::kDegenerateInput, "C50 of an all-zero RIR");
  }
  if (late == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(early / late);
}

/// Signed C50 difference, reference minus synthesized.
inline double c50_error(const Rir& reference, const Rir& synthesized) {
  return c50(reference) - c50(synthesized);
}

}  // namespace fadein
