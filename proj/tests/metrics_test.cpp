#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "fadein/metrics.hpp"
#include "fadein/rng.hpp"

namespace fadein {
namespace {

TEST(EnvelopeRmseTest, Examples) {
  const std::vector<double> a = {0.1, 0.5, 0.2, 0.05};
  EXPECT_EQ(envelope_rmse(a, a), 0.0);
  auto shifted = a;
  for (double& v : shifted) v += 0.25;
  EXPECT_NEAR(envelope_rmse(shifted, a), 0.25, 1e-15);
  auto head = a;
  head[0] = 9.0;
  head[1] = -3.0;
  EXPECT_EQ(envelope_rmse(head, a, 2), 0.0);
  EXPECT_GT(envelope_rmse(head, a, 1), 0.0);
}

TEST(EnvelopeRmseTest, Errors) {
  const std::vector<double> a(4, 1.0), b(5, 1.0);
  try {
    envelope_rmse(a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShape);
  }
  EXPECT_THROW(envelope_rmse(a, a, 4), Error);
}

TEST(EnvelopeRmseTest, IsAMetric) {
  Engine eng(4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(50), y(50), z(50);
    for (std::size_t i = 0; i < 50; ++i) {
      x[i] = uniform01(eng);
      y[i] = uniform01(eng);
      z[i] = uniform01(eng);
    }
    EXPECT_EQ(envelope_rmse(x, y, 3), envelope_rmse(y, x, 3));
    EXPECT_LE(envelope_rmse(x, z, 3), envelope_rmse(x, y, 3) + envelope_rmse(y, z, 3) + 1e-15);
    EXPECT_GE(envelope_rmse(x, y, 3), 0.0);
  }
}

Rir exponential(double tau_s, int fs = 48000, std::size_t n = 48000) {
  Rir r;
  r.sample_rate = fs;
  r.samples.resize(n);
  // Energy decays as exp(-t / tau).
  for (std::size_t i = 0; i < n; ++i) r.samples[i] = std::exp(-0.5 * i / (tau_s * fs));
  return r;
}

TEST(C50Test, ImpulseIsInfinite) {
  Rir r{std::vector<double>(4800, 0.0), 48000, "", {}};
  r.samples[0] = 1.0;
  EXPECT_EQ(c50(r), std::numeric_limits<double>::infinity());
}

TEST(C50Test, HalfEnergyAtFiftyMilliseconds) {
  // With tau = 0.05 / ln 2 the energy before and after 50 ms are equal for an
  // infinitely long response; 1 s of decay leaves a negligible remainder.
  EXPECT_NEAR(c50(exponential(0.05 / std::log(2.0))), 0.0, 0.05);
}

TEST(C50Test, EqualEnergiesAreExactlyZero) {
  Rir r{std::vector<double>(4800, 0.0), 48000, "", {}};
  r.samples[0] = 2.0;
  r.samples[2400] = -2.0;  // boundary sample counts as late
  EXPECT_EQ(c50(r), 0.0);
}

TEST(C50Test, ErrorsAndScaleInvariance) {
  try {
    c50(Rir{std::vector<double>(4800, 0.0), 48000, "", {}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateInput);
  }
  EXPECT_THROW(c50(Rir{std::vector<double>(100, 1.0), 48000, "", {}}), Error);
  Rir a = exponential(0.2);
  Rir b = a;
  for (double& v : b.samples) v *= -7.0;
  EXPECT_NEAR(c50(a), c50(b), 1e-12);
  EXPECT_NEAR(c50_error(a, b), 0.0, 1e-12);
  EXPECT_EQ(c50_error(a, a), 0.0);
}

TEST(C50Test, ErrorSign) {
  const Rir dry = exponential(0.02);
  const Rir wet = exponential(0.3);
  EXPECT_GT(c50(dry), c50(wet));
  EXPECT_GT(c50_error(dry, wet), 0.0);
  EXPECT_NEAR(c50_error(dry, wet), -c50_error(wet, dry), 1e-12);
}

}  // namespace
}  // namespace fadein
