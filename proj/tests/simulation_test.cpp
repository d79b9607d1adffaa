#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fadein/convolve.hpp"
#include "fadein/rng.hpp"
#include "fadein/simulation.hpp"

namespace fadein {
namespace {

double energy(const std::vector<double>& x) {
  return std::inner_product(x.begin(), x.end(), x.begin(), 0.0);
}

TEST(RoomResponseTest, FastDecayPutsEnergyInFirstSample) {
  const Rir h = gen_room_response(1e6, 4800, 48000, 3);
  EXPECT_GT(h.samples[0] * h.samples[0] / energy(h.samples), 0.999);
  // Expected fraction: 1 - exp(-2 delta / fs).
  EXPECT_GT(1.0 - std::exp(-2.0 * 1e6 / 48000.0), 0.999);
}

TEST(RoomResponseTest, EnvelopeIsExponential) {
  const int fs = 48000;
  const double delta = 12.0;
  const std::size_t n = fs;
  const Rir h = gen_room_response(delta, n, fs, 21);
  GaussianSource g(21);
  const auto t = static_cast<std::size_t>(std::lround(fs / delta));
  for (std::size_t i = 0; i < n; ++i) {
    const double noise = g();
    if (i == 0) EXPECT_EQ(h.samples[0], noise);
    if (i == t) EXPECT_NEAR(h.samples[i] / noise, std::exp(-1.0), 1e-12);
  }
}

TEST(RoomResponseTest, SeedsDifferEnergiesAgree) {
  const Rir a = gen_room_response(2.0, 96000, 48000, 1);
  const Rir b = gen_room_response(2.0, 96000, 48000, 2);
  EXPECT_NE(a.samples, b.samples);
  EXPECT_NEAR(energy(a.samples) / energy(b.samples), 1.0, 0.05);
  EXPECT_EQ(a.samples, gen_room_response(2.0, 96000, 48000, 1).samples);
}

TEST(RoomResponseTest, RejectsNonPositiveRate) {
  EXPECT_THROW(gen_room_response(0.0, 10, 48000, 1), Error);
  EXPECT_THROW(gen_room_response(-3.0, 10, 48000, 1), Error);
  EXPECT_THROW(chain_response(RoomChain{{}, 10, 48000, 1}), Error);
}

TEST(ChainResponseTest, SingleRoomMatchesRoomResponse) {
  const Rir a = chain_response(RoomChain{{9.0}, 4800, 48000, 44});
  EXPECT_EQ(a.samples, gen_room_response(9.0, 4800, 48000, 44).samples);
}

TEST(ChainResponseTest, UnitImpulseRoomIsIdentity) {
  const Rir h = gen_room_response(9.0, 4800, 48000, 5);
  std::vector<double> impulse(4800, 0.0);
  impulse[0] = 1.0;
  const auto y = convolve_truncated(h.samples, impulse, h.size());
  for (std::size_t i = 0; i < h.size(); ++i) EXPECT_NEAR(y[i], h.samples[i], 1e-12);
}

TEST(ChainResponseTest, ConvolutionMatchesDirectSum) {
  GaussianSource g(8);
  std::vector<double> a(300), b(200);
  for (double& v : a) v = g();
  for (double& v : b) v = g();
  const auto y = convolve_truncated(a, b, 400);
  for (std::size_t n = 0; n < y.size(); ++n) {
    double s = 0.0;
    for (std::size_t k = 0; k < b.size() && k <= n; ++k) {
      if (n - k < a.size()) s += a[n - k] * b[k];
    }
    EXPECT_NEAR(y[n], s, 1e-10);
  }
}

TEST(ChainResponseTest, DeterministicAndFinite) {
  const RoomChain chain{{30.0, 6.0, 14.0}, 24000, 48000, 99};
  const Rir a = chain_response(chain);
  EXPECT_EQ(a.samples, chain_response(chain).samples);
  EXPECT_TRUE(std::isfinite(energy(a.samples)));
}

TEST(AnalyticEnvelopeTest, Examples) {
  const std::vector<double> rates = {20.0, 5.0};
  const std::vector<double> t = {0.0, 0.0924};
  const auto v = analytic_envelope(rates, t);
  EXPECT_EQ(v[0], 0.0);
  EXPECT_NEAR(v[1], 0.0316, 5e-4);

  // Quadrature of exp(-20 s) exp(-5 (t - s)) over [0, t].
  const double tt = 0.0924;
  const int steps = 20000;
  double q = 0.0;
  for (int i = 0; i < steps; ++i) {
    const double s = (i + 0.5) * tt / steps;
    q += std::exp(-20.0 * s) * std::exp(-5.0 * (tt - s)) * tt / steps;
  }
  EXPECT_NEAR(v[1], q, 1e-9);
}

TEST(AnalyticEnvelopeTest, SymmetricAndNonnegativeWithOneMaximum) {
  std::vector<double> t(2000);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = i * 1e-3;
  const std::vector<double> fwd = {20.0, 5.0}, rev = {5.0, 20.0};
  const auto a = analytic_envelope(fwd, t);
  const auto b = analytic_envelope(rev, t);
  int maxima = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_NEAR(a[i], b[i], 1e-15);
    EXPECT_GE(a[i], 0.0);
    if (i > 0 && i + 1 < t.size() && a[i] > a[i - 1] && a[i] >= a[i + 1]) ++maxima;
  }
  EXPECT_EQ(maxima, 1);
  EXPECT_LT(a.back(), 1e-4 * *std::max_element(a.begin(), a.end()));
  const std::vector<double> neg = {-0.1};
  EXPECT_EQ(analytic_envelope(fwd, neg)[0], 0.0);
}

TEST(AnalyticEnvelopeTest, ThreeRoomsMatchNestedQuadrature) {
  const std::vector<double> rates = {30.0, 6.0, 14.0};
  const std::vector<double> two = {30.0, 6.0};
  const double t = 0.15;
  const int steps = 4000;
  std::vector<double> s(steps);
  for (int i = 0; i < steps; ++i) s[i] = (i + 0.5) * t / steps;
  const auto inner = analytic_envelope(two, s);
  double q = 0.0;
  for (int i = 0; i < steps; ++i) q += inner[i] * std::exp(-14.0 * (t - s[i])) * t / steps;
  const std::vector<double> at = {t};
  EXPECT_NEAR(analytic_envelope(rates, at)[0], q, 1e-7 * q);
}

TEST(AnalyticEnvelopeTest, CoincidentRatesRejected) {
  const std::vector<double> rates = {5.0, 5.0 * (1.0 + 1e-12)};
  const std::vector<double> t = {0.1};
  try {
    analytic_envelope(rates, t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNearSingular);
  }
}

// Per-window mean energy of an ensemble of chains, and the exact window
// average of the expected energy fs^(k-1) * analytic_envelope(2 delta).
struct EnsembleCase {
  std::vector<double> rates = {20.0, 5.0};
  int fs = 16000;
  std::size_t length = 8000;
  std::size_t window = 80;
};

std::vector<double> ensemble_window_energy(const EnsembleCase& c, std::size_t runs,
                                           std::uint64_t seed0) {
  std::vector<double> acc(c.length / c.window, 0.0);
  for (std::size_t r = 0; r < runs; ++r) {
    const Rir h = chain_response(RoomChain{c.rates, c.length, c.fs, derive_seed(seed0, r)});
    for (std::size_t m = 0; m < acc.size(); ++m) {
      double e = 0.0;
      for (std::size_t i = m * c.window; i < (m + 1) * c.window; ++i) e += h.samples[i] * h.samples[i];
      acc[m] += e / c.window / runs;
    }
  }
  return acc;
}

std::vector<double> expected_window_energy(const EnsembleCase& c) {
  std::vector<double> t(c.length);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i) / c.fs;
  const auto rms = expected_rms_envelope(c.rates, t, c.fs);
  std::vector<double> out(c.length / c.window, 0.0);
  for (std::size_t m = 0; m < out.size(); ++m) {
    for (std::size_t i = m * c.window; i < (m + 1) * c.window; ++i) out[m] += rms[i] * rms[i] / c.window;
  }
  return out;
}

double relative_l2(const std::vector<double>& est, const std::vector<double>& ref) {
  const double peak = *std::max_element(ref.begin(), ref.end());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    if (ref[i] < 1e-6 * peak) continue;
    num += (est[i] - ref[i]) * (est[i] - ref[i]);
    den += ref[i] * ref[i];
  }
  return std::sqrt(num / den);
}

TEST(EnsembleTest, ConvergesAtInverseSquareRootRate) {
  const EnsembleCase c;
  const auto ref = expected_window_energy(c);
  const double e100 = relative_l2(ensemble_window_energy(c, 100, 1), ref);
  const double e400 = relative_l2(ensemble_window_energy(c, 400, 2), ref);
  const double e1600 = relative_l2(ensemble_window_energy(c, 1600, 3), ref);
  // Each fourfold increase should halve the error.
  EXPECT_GT(e100 / e400, 1.4);
  EXPECT_LT(e100 / e400, 2.8);
  EXPECT_GT(e400 / e1600, 1.4);
  EXPECT_LT(e400 / e1600, 2.8);
  EXPECT_LT(e1600, 0.05);
}

TEST(EnsembleTest, EnergyPeakOfTwoRoomChain) {
  // Expected energy peaks where d/dt [exp(-2 d1 t) - exp(-2 d2 t)] = 0,
  // t* = ln(d1/d2) / (2 (d1 - d2)).
  EnsembleCase c;
  c.window = 16;
  const auto ens = ensemble_window_energy(c, 1000, 17);
  const auto peak = static_cast<std::size_t>(std::max_element(ens.begin(), ens.end()) - ens.begin());
  const double t_peak = (peak + 0.5) * c.window / c.fs;
  const double expect = std::log(4.0) / 30.0;
  EXPECT_NEAR(t_peak, expect, 0.1 * expect);
}

TEST(PresetTest, ThreeRoomPaths) {
  EXPECT_EQ(ThreeRoomPreset::path_to(1), std::vector<double>{30.0});
  EXPECT_EQ(ThreeRoomPreset::path_to(3), (std::vector<double>{30.0, 6.0, 14.0}));
  EXPECT_LT(ThreeRoomPreset::kRoom2, ThreeRoomPreset::kRoom3);
  EXPECT_LT(ThreeRoomPreset::kRoom3, ThreeRoomPreset::kRoom1);
  EXPECT_THROW(ThreeRoomPreset::path_to(4), Error);
}

}  // namespace
}  // namespace fadein
