#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "fadein/decay.hpp"
#include "fadein/kernels.hpp"
#include "fadein/rng.hpp"

namespace fadein {
namespace {

constexpr int kFs = 48000;

// EDF(t) = N (L - t) + sum_k A_k exp(ln(1e-6) t / (fs T60_k)).
Edf make_edf(const std::vector<double>& t60, const std::vector<double>& amps, double noise,
             std::size_t length) {
  Edf edf;
  edf.values.resize(length);
  for (std::size_t t = 0; t < length; ++t) {
    double v = noise * static_cast<double>(length - t);
    for (std::size_t k = 0; k < t60.size(); ++k) {
      v += amps[k] * decay_kernel(t60[k], static_cast<double>(t), kFs);
    }
    edf.values[t] = v;
  }
  return edf;
}

TEST(EdfFitTest, SingleSlopeRecovered) {
  const Edf edf = make_edf({0.5}, {1.0}, 0.0, 48000);
  const DecayEstimate est = fit_edf_decays(edf, kFs, 3);
  ASSERT_EQ(est.decay_times.size(), 1u);
  EXPECT_NEAR(t60_from_kernel_time(est.decay_times[0]), 0.5, 0.005);
  EXPECT_NEAR(est.decay_times[0], 1.0, 0.01);
  EXPECT_LT(est.residual, 1e-8);
}

TEST(EdfFitTest, NoiseOnlySelectsZeroComponents) {
  // Constant per-sample energy c integrates to c (L - t).
  const double c = 2.5e-4;
  const Edf edf = make_edf({}, {}, c, 24000);
  const DecayEstimate est = fit_edf_decays(edf, kFs, 2);
  EXPECT_TRUE(est.decay_times.empty());
  EXPECT_NEAR(est.noise_level, c, 1e-9 * c);
}

// Independent estimate: exhaustive (T1, T2) grid, amplitudes by 2x2 linear
// least squares, ranked by the sqrt-domain residual.
std::pair<double, double> brute_force_times(const Edf& edf) {
  const std::size_t n = edf.size();
  const std::size_t stride = std::max<std::size_t>(1, n / 400);
  double best = std::numeric_limits<double>::infinity();
  std::pair<double, double> arg;
  for (double t1 = 0.2; t1 <= 0.4 + 1e-9; t1 += 0.005) {
    for (double t2 = 0.8; t2 <= 1.6 + 1e-9; t2 += 0.02) {
      double g11 = 0, g12 = 0, g22 = 0, b1 = 0, b2 = 0;
      for (std::size_t t = 0; t < n; t += stride) {
        const double p1 = decay_kernel(t1, t, kFs), p2 = decay_kernel(t2, t, kFs);
        g11 += p1 * p1;
        g12 += p1 * p2;
        g22 += p2 * p2;
        b1 += p1 * edf.values[t];
        b2 += p2 * edf.values[t];
      }
      const double det = g11 * g22 - g12 * g12;
      const double a1 = (g22 * b1 - g12 * b2) / det;
      const double a2 = (g11 * b2 - g12 * b1) / det;
      double r = 0.0;
      for (std::size_t t = 0; t < n; t += stride) {
        const double m = a1 * decay_kernel(t1, t, kFs) + a2 * decay_kernel(t2, t, kFs);
        const double d = std::sqrt(edf.values[t]) - std::sqrt(std::max(m, 0.0));
        r += d * d;
      }
      if (r < best) {
        best = r;
        arg = {t1, t2};
      }
    }
  }
  return arg;
}

TEST(EdfFitTest, TwoSlopesRecovered) {
  const Edf edf = make_edf({0.3, 1.2}, {1.0, 0.1}, 0.0, 96000);
  const DecayEstimate est = fit_edf_decays(edf, kFs, 3);
  ASSERT_EQ(est.decay_times.size(), 2u);
  EXPECT_NEAR(t60_from_kernel_time(est.decay_times[0]), 0.3, 0.3 * 0.05);
  EXPECT_NEAR(t60_from_kernel_time(est.decay_times[1]), 1.2, 1.2 * 0.05);
  EXPECT_NEAR(est.amplitudes[0] / est.amplitudes[1], 10.0, 0.5);
  EXPECT_LT(est.residual, 1e-8);
  const auto [bt1, bt2] = brute_force_times(edf);
  EXPECT_NEAR(t60_from_kernel_time(est.decay_times[0]), bt1, 0.3 * 0.05);
  EXPECT_NEAR(t60_from_kernel_time(est.decay_times[1]), bt2, 1.2 * 0.05);
}

TEST(EdfFitTest, ExactModelDataReachesTinyResidual) {
  const Edf edf = make_edf({0.2, 0.7, 2.0}, {1.0, 0.3, 0.02}, 1e-9, 48000);
  const DecayEstimate est = fit_edf_decays(edf, kFs, 3);
  EXPECT_LT(est.residual, 1e-8);
  EXPECT_TRUE(std::is_sorted(est.decay_times.begin(), est.decay_times.end()));
  for (double a : est.amplitudes) EXPECT_GE(a, 0.0);
}

TEST(EdfFitTest, Errors) {
  Edf tiny;
  tiny.values = {1, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2};
  EXPECT_THROW(fit_edf_decays(tiny, kFs, 1), Error);
  const Edf ok = make_edf({0.5}, {1.0}, 0.0, 100);
  EXPECT_THROW(fit_edf_decays(ok, kFs, 0), Error);
  EXPECT_THROW(fit_edf_decays(ok, kFs, 4), Error);
  Edf rising = ok;
  rising.values[5] = 2.0;
  EXPECT_THROW(fit_edf_decays(rising, kFs, 1), Error);
}

TEST(KMeansTest, SymmetricGroups) {
  const std::vector<double> v = {0.19, 0.20, 0.21, 0.98, 1.00, 1.02};
  const auto r = kmeans_1d(v, 2, 7);
  ASSERT_EQ(r.centroids.size(), 2u);
  EXPECT_NEAR(r.centroids[0], 0.20, 1e-12);
  EXPECT_NEAR(r.centroids[1], 1.00, 1e-12);
}

TEST(KMeansTest, SingleClusterIsMean) {
  const std::vector<double> v = {0.3, 0.9, 1.4, 0.2, 2.2};
  const auto r = kmeans_1d(v, 1, 1);
  EXPECT_NEAR(r.centroids[0], std::accumulate(v.begin(), v.end(), 0.0) / v.size(), 1e-15);
}

// Optimal 1-D clustering is a contiguous partition of the sorted values, so an
// exhaustive search over cut points gives the global optimum.
double exhaustive_inertia(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  auto sse = [&](std::size_t a, std::size_t b) {
    const double mean = std::accumulate(v.begin() + a, v.begin() + b, 0.0) / (b - a);
    double s = 0.0;
    for (std::size_t i = a; i < b; ++i) s += (v[i] - mean) * (v[i] - mean);
    return s;
  };
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) best = std::min(best, sse(0, i) + sse(i, j) + sse(j, n));
  }
  return best;
}

TEST(KMeansTest, PlantedClusters) {
  const std::vector<double> centers = {0.4, 1.1, 2.3};
  std::vector<double> v;
  GaussianSource g(42);
  for (int i = 0; i < 20; ++i) {
    for (double c : centers) v.push_back(c + 0.01 * g());
  }
  const auto r = kmeans_1d(v, 3, 5);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(r.centroids[k], centers[k], 0.02);
  EXPECT_NEAR(r.inertia, exhaustive_inertia(v), 1e-12);
}

TEST(KMeansTest, PermutationInvariantAndDeterministic) {
  std::vector<double> v;
  Engine eng(9);
  for (int i = 0; i < 40; ++i) v.push_back(uniform01(eng) * 3.0);
  const auto a = kmeans_1d(v, 4, 123);
  std::reverse(v.begin(), v.end());
  std::rotate(v.begin(), v.begin() + 7, v.end());
  const auto b = kmeans_1d(v, 4, 123);
  EXPECT_EQ(a.centroids, b.centroids);
  EXPECT_EQ(a.centroids, kmeans_1d(v, 4, 123).centroids);
}

TEST(KMeansTest, TooFewDistinctValues) {
  const std::vector<double> v = {1.0, 1.0, 2.0};
  try {
    kmeans_1d(v, 3, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientData);
  }
}

TEST(ClusterTest, GroupsByBand) {
  std::vector<DecayEstimate> est;
  for (int i = 0; i < 6; ++i) {
    DecayEstimate e;
    e.band_center = (i % 2 == 0) ? 500.0 : 1000.0;
    e.decay_times = {0.5 + 0.01 * i, 2.0 + 0.01 * i};
    est.push_back(e);
  }
  const auto bands = cluster_decay_times(est, 2, 1);
  ASSERT_EQ(bands.size(), 2u);
  EXPECT_EQ(bands[0].band_center, 500.0);
  EXPECT_NEAR(bands[0].times[0], 0.52, 1e-12);
  EXPECT_NEAR(bands[1].times[1], 2.03, 1e-12);
  EXPECT_THROW(cluster_decay_times(est, 7, 1), Error);
}

TEST(KernelTest, DefinitionValues) {
  EXPECT_EQ(decay_kernel(0.7, 0.0, kFs), 1.0);
  EXPECT_NEAR(decay_kernel(0.5, 12000.0, kFs), 1e-3, 1e-15);
  // Last envelope point sits at (n - 0.5) * window.
  const std::size_t n = 200, w = 240;
  const double t_end = (n - 0.5) * w;
  const auto set = build_kernels({{t_end / kFs}}, n, w, kFs);
  EXPECT_NEAR(set.bands[0].matrix(n - 1, 1), 1e-6, 1e-6 * 1e-12);
}

TEST(KernelTest, ExactAtDecayTime) {
  Engine eng(77);
  for (int i = 0; i < 20; ++i) {
    const double t = 0.05 + 5.0 * uniform01(eng);
    EXPECT_NEAR(decay_kernel(t, kFs * t, kFs) / 1e-6, 1.0, 1e-12);
  }
}

TEST(KernelTest, MatrixStructure) {
  const auto set = build_kernels({{0.2, 0.9, 3.0}}, 200, 240, kFs);
  const auto& m = set.bands[0].matrix;
  ASSERT_EQ(m.cols(), 4);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    EXPECT_EQ(m(r, 0), 1.0);
    // Longer decay times dominate pointwise.
    EXPECT_LE(m(r, 1), m(r, 2));
    EXPECT_LE(m(r, 2), m(r, 3));
    if (r > 0) {
      for (Eigen::Index c = 1; c < 4; ++c) EXPECT_LT(m(r, c), m(r - 1, c));
    }
  }
}

TEST(KernelTest, RejectsNonPositiveTimes) {
  EXPECT_THROW(build_kernels({{0.0}}, 10, 10, kFs), Error);
  EXPECT_THROW(build_kernels({{-1.0, 0.5}}, 10, 10, kFs), Error);
}

TEST(KernelTest, ConventionHelpers) {
  EXPECT_DOUBLE_EQ(kernel_time_from_t60(0.5), 1.0);
  EXPECT_DOUBLE_EQ(t60_from_kernel_time(1.0), 0.5);
  // exp(-delta t) reaches 1e-6 at ln(1e6) / delta.
  const double t = kernel_time_from_decay_rate(10.0);
  EXPECT_NEAR(t, std::log(1e6) / 10.0, 1e-15);
  EXPECT_NEAR(decay_kernel(t, 0.3 * kFs, kFs), std::exp(-10.0 * 0.3), 1e-15);
  EXPECT_NEAR(decay_rate_from_kernel_time(t), 10.0, 1e-12);
}

}  // namespace
}  // namespace fadein
