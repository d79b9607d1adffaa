#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fadein/error.hpp"
#include "fadein/kernels.hpp"
#include "fadein/qp.hpp"
#include "fadein/rng.hpp"
#include "fadein/signal.hpp"
#include "fadein/types.hpp"

namespace fadein {

/// Per-RIR, per-band decay estimate. `decay_times` use the kernel convention
/// (twice the energy T60); `amplitudes` and `noise_level` are in the EDF's
/// energy units, with `noise_level` the per-sample noise energy.
struct DecayEstimate {
  std::vector<double> decay_times;
  std::vector<double> amplitudes;
  double noise_level = 0.0;
  double band_center = 0.0;
  std::string position_id;
  double residual = 0.0;  // power-scaled objective on the peak-normalized EDF
};

struct EdfFitOptions {
  double grid_min_s = 0.05;  // energy T60 candidates
  double grid_max_s = 5.0;
  int grid_size = 50;
  double parsimony = 0.05;   // accept the smallest order within 5% of the best
  std::size_t max_points = 400;
};

namespace detail {

struct EdfProblem {
  std::vector<double> t;   // samples
  std::vector<double> y;   // EDF / EDF[0]
  std::vector<double> fy;  // sqrt(y)
  double length = 0.0;     // L
  double sample_rate = 0.0;
};

// Eq-1 style model on the normalized EDF. params = [noise, A_1..A_k, log T_1..log T_k]
// with the noise column scaled to (L - t) / L.
inline double edf_model(const EdfProblem& p, std::size_t i, const Eigen::VectorXd& params,
                        int k) {
  double m = params(0) * (p.length - p.t[i]) / p.length;
  for (int c = 0; c < k; ++c) {
    m += params(1 + c) * decay_kernel(std::exp(params(1 + k + c)), p.t[i], p.sample_rate);
  }
  return m;
}

inline double edf_objective(const EdfProblem& p, const Eigen::VectorXd& params, int k) {
  double acc = 0.0;
  for (std::size_t i = 0; i < p.t.size(); ++i) {
    const double r = p.fy[i] - power_scale(edf_model(p, i, params, k));
    acc += r * r;
  }
  return acc;
}

// Levenberg-Marquardt with bound constraints on [noise, amplitudes] >= 0 and
// log T within the grid span (widened by a decade), steps via the active-set QP.
inline Eigen::VectorXd refine_edf(const EdfProblem& p, Eigen::VectorXd params, int k,
                                  double log_t_lo, double log_t_hi, double* objective) {
  const Eigen::Index n = 1 + 2 * k;
  Eigen::MatrixXd cons = Eigen::MatrixXd::Zero(1 + 3 * k, n);
  Eigen::VectorXd bounds = Eigen::VectorXd::Zero(1 + 3 * k);
  for (int c = 0; c < 1 + k; ++c) cons(c, c) = 1.0;
  for (int c = 0; c < k; ++c) {
    cons(1 + k + 2 * c, 1 + k + c) = 1.0;
    bounds(1 + k + 2 * c) = log_t_lo;
    cons(2 + k + 2 * c, 1 + k + c) = -1.0;
    bounds(2 + k + 2 * c) = -log_t_hi;
  }

  double obj = edf_objective(p, params, k);
  double mu = 1e-3;
  const std::size_t rows = p.t.size();
  for (int it = 0; it < 300 && obj > 1e-30; ++it) {
    Eigen::MatrixXd jac(static_cast<Eigen::Index>(rows), n);
    Eigen::VectorXd r(static_cast<Eigen::Index>(rows));
    for (std::size_t i = 0; i < rows; ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      const double m = edf_model(p, i, params, k);
      const double df = m > kPowerScaleFloor ? 0.5 / std::sqrt(m) : 0.0;
      r(row) = p.fy[i] - power_scale(m);
      jac(row, 0) = df * (p.length - p.t[i]) / p.length;
      for (int c = 0; c < k; ++c) {
        const double tk = std::exp(params(1 + k + c));
        const double psi = decay_kernel(tk, p.t[i], p.sample_rate);
        jac(row, 1 + c) = df * psi;
        jac(row, 1 + k + c) = df * params(1 + c) * psi * (-kKernelLogFloor * p.t[i] /
                                                           (p.sample_rate * tk));
      }
    }
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd g = -(jac.transpose() * r);
    bool improved = false;
    while (mu < 1e12) {
      Eigen::MatrixXd h = jtj;
      h.diagonal() += mu * (jtj.diagonal().array() + 1e-12).matrix();
      const QpResult qp = solve_inequality_qp(h, g, cons, bounds - cons * params,
                                              Eigen::VectorXd::Zero(n));
      const Eigen::VectorXd trial = params + qp.x;
      const double trial_obj = edf_objective(p, trial, k);
      if (trial_obj < obj) {
        const double decrease = (obj - trial_obj) / obj;
        params = trial;
        obj = trial_obj;
        mu = std::max(mu / 3.0, 1e-15);
        improved = decrease > 1e-13;
        break;
      }
      mu *= 4.0;
    }
    if (!improved) break;
  }
  *objective = obj;
  return params;
}

// Small nonnegative least squares through the normal equations.
inline Eigen::VectorXd nnls_normal(const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs) {
  const Eigen::Index n = gram.rows();
  Eigen::MatrixXd h = gram;
  h.diagonal().array() += 1e-14 * std::max(gram.diagonal().maxCoeff(), 1e-300);
  return solve_inequality_qp(h, -rhs, Eigen::MatrixXd::Identity(n, n), Eigen::VectorXd::Zero(n),
                             Eigen::VectorXd::Zero(n))
      .x;
}

}  // namespace detail

/// Fits up to `max_components` exponential decays plus a noise term to an EDF.
/// Candidate decay times come from a log-spaced grid (weighted linear NNLS as
/// a proxy for the power-scaled error), then every order is refined by
/// constrained Levenberg-Marquardt on the power-scaled objective.
inline DecayEstimate fit_edf_decays(const Edf& edf, int sample_rate, int max_components,
                                    const EdfFitOptions& options = {}) {
  if (edf.size() < 10) {
    throw Error(ErrorCode::kInsufficientData, "EDF needs at least 10 points");
  }
  if (max_components < 1 || max_components > 3) {
    throw Error(ErrorCode::kInvalidParameter, "max_components must be in [1, 3]");
  }
  if (sample_rate <= 0) {
    throw Error(ErrorCode::kInvalidParameter, "sample rate must be positive");
  }
  for (std::size_t i = 1; i < edf.size(); ++i) {
    if (edf.values[i] > edf.values[i - 1] || edf.values[i] < 0.0) {
      throw Error(ErrorCode::kDomain, "EDF must be nonnegative and non-increasing");
    }
  }

  DecayEstimate est;
  const double scale = edf.values.front();
  if (!(scale > 0.0)) return est;

  detail::EdfProblem prob;
  prob.length = static_cast<double>(edf.size());
  prob.sample_rate = sample_rate;
  const std::size_t stride = std::max<std::size_t>(1, edf.size() / options.max_points);
  for (std::size_t i = 0; i < edf.size(); i += stride) {
    prob.t.push_back(static_cast<double>(i));
    prob.y.push_back(edf.values[i] / scale);
    prob.fy.push_back(power_scale(edf.values[i] / scale));
  }
  const auto rows = static_cast<Eigen::Index>(prob.t.size());

  // Candidate columns weighted by 1 / (2 sqrt(y)), the first-order weight of
  // the power-scaled residual.
  std::vector<double> grid(static_cast<std::size_t>(options.grid_size));
  for (int g = 0; g < options.grid_size; ++g) {
    grid[static_cast<std::size_t>(g)] =
        options.grid_min_s *
        std::pow(options.grid_max_s / options.grid_min_s,
                 static_cast<double>(g) / static_cast<double>(options.grid_size - 1));
  }
  const Eigen::Index ncols = options.grid_size + 1;
  Eigen::MatrixXd cols(rows, ncols);
  Eigen::VectorXd wy(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const std::size_t ui = static_cast<std::size_t>(i);
    const double w = 0.5 / std::sqrt(std::max(prob.y[ui], kPowerScaleFloor));
    wy(i) = w * prob.y[ui];
    cols(i, 0) = w * (prob.length - prob.t[ui]) / prob.length;
    for (Eigen::Index g = 1; g < ncols; ++g) {
      cols(i, g) = w * decay_kernel(grid[static_cast<std::size_t>(g - 1)], prob.t[ui],
                                    sample_rate);
    }
  }
  const Eigen::MatrixXd gram = cols.transpose() * cols;
  const Eigen::VectorXd proj = cols.transpose() * wy;
  const double yy = wy.squaredNorm();

  const double log_lo = std::log(options.grid_min_s) - std::log(10.0);
  const double log_hi = std::log(options.grid_max_s) + std::log(10.0);

  struct OrderFit {
    Eigen::VectorXd params;
    double objective = std::numeric_limits<double>::infinity();
  };
  std::vector<OrderFit> orders(static_cast<std::size_t>(max_components) + 1);

  // Order 0: noise only, exact in closed form for sqrt(N (L - t) / L).
  {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < prob.t.size(); ++i) {
      const double s = std::sqrt((prob.length - prob.t[i]) / prob.length);
      num += prob.fy[i] * s;
      den += s * s;
    }
    const double root = std::max(0.0, num / den);
    OrderFit& o = orders[0];
    o.params = Eigen::VectorXd::Constant(1, root * root);
    o.objective = detail::edf_objective(prob, o.params, 0);
  }

  for (int k = 1; k <= max_components; ++k) {
    std::vector<int> idx(static_cast<std::size_t>(k));
    for (int c = 0; c < k; ++c) idx[static_cast<std::size_t>(c)] = c;
    double best_lin = std::numeric_limits<double>::infinity();
    std::vector<int> best_idx;
    Eigen::VectorXd best_coef;
    // Enumerate ascending k-subsets of the grid.
    while (true) {
      std::vector<Eigen::Index> sel = {0};
      for (int c : idx) sel.push_back(c + 1);
      const auto s = static_cast<Eigen::Index>(sel.size());
      Eigen::MatrixXd gsub(s, s);
      Eigen::VectorXd psub(s);
      for (Eigen::Index a = 0; a < s; ++a) {
        psub(a) = proj(sel[static_cast<std::size_t>(a)]);
        for (Eigen::Index b = 0; b < s; ++b) {
          gsub(a, b) = gram(sel[static_cast<std::size_t>(a)], sel[static_cast<std::size_t>(b)]);
        }
      }
      const Eigen::VectorXd coef = detail::nnls_normal(gsub, psub);
      const double res = yy - 2.0 * coef.dot(psub) + coef.dot(gsub * coef);
      if (res < best_lin) {
        best_lin = res;
        best_idx = idx;
        best_coef = coef;
      }
      int c = k - 1;
      while (c >= 0 && idx[static_cast<std::size_t>(c)] == options.grid_size - k + c) --c;
      if (c < 0) break;
      ++idx[static_cast<std::size_t>(c)];
      for (int j = c + 1; j < k; ++j) {
        idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
      }
    }

    Eigen::VectorXd start(1 + 2 * k);
    start(0) = best_coef(0);
    for (int c = 0; c < k; ++c) {
      start(1 + c) = best_coef(1 + c);
      start(1 + k + c) = std::log(grid[static_cast<std::size_t>(best_idx[static_cast<std::size_t>(c)])]);
    }
    OrderFit& o = orders[static_cast<std::size_t>(k)];
    o.params = detail::refine_edf(prob, start, k, log_lo, log_hi, &o.objective);
  }

  double best = std::numeric_limits<double>::infinity();
  for (const auto& o : orders) best = std::min(best, o.objective);
  const double energy = Eigen::Map<const Eigen::VectorXd>(prob.fy.data(), rows).squaredNorm();
  const double accept = best * (1.0 + options.parsimony) + 1e-14 * energy;
  int order = 0;
  while (orders[static_cast<std::size_t>(order)].objective > accept) ++order;

  const OrderFit& chosen = orders[static_cast<std::size_t>(order)];
  est.residual = chosen.objective;
  est.noise_level = chosen.params(0) * scale / prob.length;
  std::vector<std::pair<double, double>> comps;
  for (int c = 0; c < order; ++c) {
    const double amp = chosen.params(1 + c);
    if (amp <= 0.0) continue;
    comps.emplace_back(kernel_time_from_t60(std::exp(chosen.params(1 + order + c))), amp * scale);
  }
  std::sort(comps.begin(), comps.end());
  for (const auto& [t, a] : comps) {
    est.decay_times.push_back(t);
    est.amplitudes.push_back(a);
  }
  return est;
}

struct KMeansResult {
  std::vector<double> centroids;  // ascending
  double inertia = 0.0;
};

/// One-dimensional K-means: k-means++ seeding, Lloyd iterations, best of
/// `restarts` runs by inertia. Input order does not affect the result.
inline KMeansResult kmeans_1d(std::span<const double> values, std::size_t k, std::uint64_t seed,
                              int restarts = 20) {
  if (k == 0) throw Error(ErrorCode::kInvalidParameter, "K must be at least 1");
  std::vector<double> x(values.begin(), values.end());
  std::sort(x.begin(), x.end());
  std::vector<double> uniq = x;
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  if (uniq.size() < k) {
    throw Error(ErrorCode::kInsufficientData, std::to_string(uniq.size()) +
                                                  " distinct values cannot form " +
                                                  std::to_string(k) + " clusters");
  }

  const std::size_t n = x.size();
  Engine eng(seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> assign(n);

  for (int run = 0; run < restarts; ++run) {
    std::vector<double> c;
    c.push_back(x[std::min(n - 1, static_cast<std::size_t>(uniform01(eng) * n))]);
    std::vector<double> d2(n);
    while (c.size() < k) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double best_d = std::numeric_limits<double>::infinity();
        for (double ci : c) best_d = std::min(best_d, (x[i] - ci) * (x[i] - ci));
        d2[i] = best_d;
        total += best_d;
      }
      const double target = uniform01(eng) * total;
      double acc = 0.0;
      std::size_t pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > target && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
      if (d2[pick] == 0.0) {
        // Every remaining mass sits on existing centroids; take the farthest point.
        pick = static_cast<std::size_t>(std::max_element(d2.begin(), d2.end()) - d2.begin());
      }
      c.push_back(x[pick]);
    }

    for (int it = 0; it < 300; ++it) {
      bool changed = it == 0;
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t a = 0;
        double best_d = std::abs(x[i] - c[0]);
        for (std::size_t j = 1; j < k; ++j) {
          const double dj = std::abs(x[i] - c[j]);
          if (dj < best_d) {  // ties stay with the lower index
            best_d = dj;
            a = j;
          }
        }
        if (assign[i] != a) changed = true;
        assign[i] = a;
      }
      if (!changed) break;
      std::vector<double> sum(k, 0.0);
      std::vector<std::size_t> count(k, 0);
      for (std::size_t i = 0; i < n; ++i) {
        sum[assign[i]] += x[i];
        ++count[assign[i]];
      }
      for (std::size_t j = 0; j < k; ++j) {
        if (count[j] > 0) {
          c[j] = sum[j] / static_cast<double>(count[j]);
          continue;
        }
        // Empty cluster: move it to the point worst served by its centroid.
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double di = std::abs(x[i] - c[assign[i]]);
          if (di > far_d) {
            far_d = di;
            far = i;
          }
        }
        c[j] = x[far];
      }
    }

    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best_d = std::numeric_limits<double>::infinity();
      for (double cj : c) best_d = std::min(best_d, (x[i] - cj) * (x[i] - cj));
      inertia += best_d;
    }
    if (inertia < best.inertia) {
      best.inertia = inertia;
      best.centroids = c;
    }
  }
  std::sort(best.centroids.begin(), best.centroids.end());
  return best;
}

struct BandCommonTimes {
  double band_center = 0.0;
  std::vector<double> times;  // kernel convention, ascending
};

/// Per-band K-means over every decay time in `estimates`. Bands are returned in
/// ascending center order.
inline std::vector<BandCommonTimes> cluster_decay_times(const std::vector<DecayEstimate>& estimates,
                                                        std::size_t k, std::uint64_t seed) {
  std::map<double, std::vector<double>> per_band;
  for (const auto& e : estimates) {
    auto& v = per_band[e.band_center];
    v.insert(v.end(), e.decay_times.begin(), e.decay_times.end());
  }
  std::vector<BandCommonTimes> out;
  for (const auto& [center, times] : per_band) {
    try {
      out.push_back({center, kmeans_1d(times, k, seed).centroids});
    } catch (const Error& err) {
      throw Error(err.code(), "band " + std::to_string(center) + " Hz: " + err.what());
    }
  }
  return out;
}

}  // namespace fadein
