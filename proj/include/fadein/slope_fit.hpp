#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <exception>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "fadein/error.hpp"
#include "fadein/kernels.hpp"
#include "fadein/qp.hpp"
#include "fadein/signal.hpp"
#include "fadein/types.hpp"

namespace fadein {

enum class FitMode { kFadeIn, kPosOnly };

inline std::string_view to_string(FitMode mode) {
  return mode == FitMode::kFadeIn ? "fadein" : "posonly";
}

inline FitMode parse_fit_mode(std::string_view s) {
  if (s == "fadein" || s == "FADE-IN") return FitMode::kFadeIn;
  if (s == "posonly" || s == "POS-ONLY") return FitMode::kPosOnly;
  throw Error(ErrorCode::kValidation, "unknown fit mode '" + std::string(s) + "'");
}

struct FitOptions {
  FitMode mode = FitMode::kFadeIn;
  std::size_t skip_head = 0;  // envelope points excluded from the objective
  int max_iterations = 500;
  double relative_tolerance = 1e-15;
  int max_active_set_changes = 2000;
};

/// Amplitudes of one band. `amplitudes[k]` multiplies the kernel of the k-th
/// common decay time; `noise` multiplies the constant kernel.
struct BandFit {
  std::vector<double> amplitudes;
  double noise = 0.0;
  double objective_value = 0.0;
  int iterations = 0;
  bool converged = true;
  bool feasible = true;
};

struct SlopeFit {
  std::string position_id;
  FitMode mode = FitMode::kFadeIn;
  std::vector<BandFit> bands;
};

namespace detail {

inline Eigen::VectorXd pack(const BandFit& fit) {
  Eigen::VectorXd p(static_cast<Eigen::Index>(fit.amplitudes.size()) + 1);
  p(0) = fit.noise;
  for (std::size_t k = 0; k < fit.amplitudes.size(); ++k) {
    p(static_cast<Eigen::Index>(k) + 1) = fit.amplitudes[k];
  }
  return p;
}

// Linear inequality rows C p >= 0 describing the feasible set of `mode`.
inline Eigen::MatrixXd constraint_rows(const Eigen::MatrixXd& psi, FitMode mode) {
  const Eigen::Index cols = psi.cols();
  if (mode == FitMode::kPosOnly) {
    return Eigen::MatrixXd::Identity(cols, cols);
  }
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(psi.rows() + 1, cols);
  c(0, 0) = 1.0;
  c.bottomRightCorner(psi.rows(), cols - 1) = psi.rightCols(cols - 1);
  return c;
}

inline double scaled_derivative(double model) {
  return model > kPowerScaleFloor ? 0.5 / std::sqrt(model) : 0.0;
}

}  // namespace detail

/// Power-scaled least-squares objective on points t >= skip_head.
inline double fit_objective(std::span<const double> target, const Eigen::MatrixXd& psi,
                            const Eigen::VectorXd& params, std::size_t skip_head) {
  const Eigen::VectorXd model = psi * params;
  double acc = 0.0;
  for (std::size_t t = skip_head; t < target.size(); ++t) {
    const double r = power_scale(target[t]) - power_scale(model(static_cast<Eigen::Index>(t)));
    acc += r * r;
  }
  return acc;
}

/// Gradient of fit_objective with respect to [noise, amplitudes...].
inline Eigen::VectorXd fit_gradient(std::span<const double> target, const Eigen::MatrixXd& psi,
                                    const Eigen::VectorXd& params, std::size_t skip_head) {
  const Eigen::VectorXd model = psi * params;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.size());
  for (std::size_t t = skip_head; t < target.size(); ++t) {
    const auto i = static_cast<Eigen::Index>(t);
    const double r = power_scale(target[t]) - power_scale(model(i));
    grad -= 2.0 * r * detail::scaled_derivative(model(i)) * psi.row(i).transpose();
  }
  return grad;
}

namespace detail {

struct GaussNewtonResult {
  Eigen::VectorXd params;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Projected Gauss-Newton: each step solves the linearized least-squares
// problem under the (linear) feasibility constraints with the active-set QP,
// followed by a backtracking line search along the feasible direction.
inline GaussNewtonResult gauss_newton(std::span<const double> target, const Eigen::MatrixXd& psi,
                                      const Eigen::MatrixXd& cons, Eigen::VectorXd params,
                                      const FitOptions& opt) {
  const Eigen::Index n_params = psi.cols();
  const std::size_t n = target.size();
  std::vector<double> fy(n);
  for (std::size_t t = 0; t < n; ++t) fy[t] = power_scale(target[t]);

  GaussNewtonResult res;
  res.params = params;
  res.objective = fit_objective(target, psi, params, opt.skip_head);
  int changes_left = opt.max_active_set_changes;

  for (int it = 0; it < opt.max_iterations; ++it) {
    res.iterations = it + 1;
    if (res.objective <= 1e-32) {
      res.converged = true;
      break;
    }
    // The objective is convex in p: its exact Hessian weights each row by
    // f(y) / (2 m^1.5) >= 0, so a full Newton step is used (halved scale).
    const Eigen::VectorXd model = psi * res.params;
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n_params, n_params);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n_params);
    for (std::size_t t = opt.skip_head; t < n; ++t) {
      const auto i = static_cast<Eigen::Index>(t);
      const double m = model(i);
      if (m <= kPowerScaleFloor) continue;
      const double r = fy[t] - std::sqrt(m);
      const auto row = psi.row(i);
      g -= (r * 0.5 / std::sqrt(m)) * row.transpose();
      h.noalias() += (0.25 * fy[t] / (m * std::sqrt(m))) * row.transpose() * row;
    }
    const double ridge = 1e-13 * std::max(h.diagonal().maxCoeff(), 1e-300);
    h.diagonal().array() += ridge;

    // Step d with C (p + d) >= 0.
    const Eigen::VectorXd lower = -(cons * res.params);
    const QpResult qp = solve_inequality_qp(h, g, cons, lower,
                                            Eigen::VectorXd::Zero(n_params),
                                            std::max(changes_left, 1));
    changes_left -= qp.changes;
    const Eigen::VectorXd step = qp.x;
    if (step.cwiseAbs().maxCoeff() <= 1e-15 * (1.0 + res.params.cwiseAbs().maxCoeff())) {
      res.converged = true;
      break;
    }

    const double slope = 2.0 * g.dot(step);
    double alpha = 1.0;
    double trial_obj = 0.0;
    Eigen::VectorXd trial;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      trial = res.params + alpha * step;
      trial_obj = fit_objective(target, psi, trial, opt.skip_head);
      if (trial_obj <= res.objective + 1e-4 * alpha * std::min(slope, 0.0)) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted || trial_obj >= res.objective) {
      res.converged = true;
      break;
    }
    const double decrease = (res.objective - trial_obj) / res.objective;
    res.params = trial;
    res.objective = trial_obj;
    if (decrease < opt.relative_tolerance) {
      res.converged = true;
      break;
    }
    if (changes_left <= 0) break;
  }
  return res;
}

inline Eigen::VectorXd initial_guess(std::span<const double> target, const Eigen::MatrixXd& psi,
                                     const Eigen::MatrixXd& cons, std::size_t skip_head) {
  const Eigen::Index rows = static_cast<Eigen::Index>(target.size() - skip_head);
  const Eigen::MatrixXd a = psi.bottomRows(rows);
  Eigen::VectorXd y(rows);
  for (Eigen::Index i = 0; i < rows; ++i) y(i) = target[static_cast<std::size_t>(i) + skip_head];
  Eigen::VectorXd p = a.colPivHouseholderQr().solve(y);
  if (!p.allFinite()) p.setZero();

  // Euclidean projection of the unconstrained solution onto {C p >= 0}.
  const Eigen::Index cols = psi.cols();
  const QpResult proj = solve_inequality_qp(Eigen::MatrixXd::Identity(cols, cols), -p, cons,
                                            Eigen::VectorXd::Zero(cons.rows()),
                                            Eigen::VectorXd::Zero(cols));
  Eigen::VectorXd x = proj.x;
  // A strictly positive noise term keeps every model value above the floor of f.
  const double peak = *std::max_element(target.begin(), target.end());
  x(0) = std::max(x(0), 1e-3 * peak);
  return x;
}

}  // namespace detail

/// Fits one band's envelope with the kernels in `band`.
inline BandFit fit_envelope(std::span<const double> target, const BandKernels& band,
                            const FitOptions& opt) {
  const Eigen::MatrixXd& psi = band.matrix;
  const std::size_t k = band.num_decays();
  if (target.size() != static_cast<std::size_t>(psi.rows())) {
    throw Error(ErrorCode::kShape, "target length " + std::to_string(target.size()) +
                                       " does not match kernel grid " +
                                       std::to_string(psi.rows()));
  }
  if (opt.skip_head >= target.size()) {
    throw Error(ErrorCode::kInvalidParameter, "skip_head must be smaller than the envelope");
  }
  BandFit fit;
  fit.amplitudes.assign(k, 0.0);
  double peak = 0.0;
  for (double v : target) {
    if (v < 0.0 || !std::isfinite(v)) {
      throw Error(ErrorCode::kDomain, "envelope values must be finite and nonnegative");
    }
    peak = std::max(peak, v);
  }
  if (peak == 0.0) return fit;

  // Solve on the peak-normalized target; amplitudes scale linearly and the
  // objective scales with the peak.
  std::vector<double> y(target.begin(), target.end());
  for (double& v : y) v /= peak;

  const Eigen::MatrixXd pos_cons = detail::constraint_rows(psi, FitMode::kPosOnly);
  auto best = detail::gauss_newton(y, psi, pos_cons,
                                   detail::initial_guess(y, psi, pos_cons, opt.skip_head), opt);
  if (opt.mode == FitMode::kFadeIn) {
    // Run from the unconstrained start and from the POS-ONLY optimum (feasible
    // here too); keeping the better of the two guarantees the nesting order.
    const Eigen::MatrixXd cons = detail::constraint_rows(psi, FitMode::kFadeIn);
    auto from_pos = detail::gauss_newton(y, psi, cons, best.params, opt);
    auto from_ls = detail::gauss_newton(
        y, psi, cons, detail::initial_guess(y, psi, cons, opt.skip_head), opt);
    best = from_ls.objective < from_pos.objective ? from_ls : from_pos;
  }

  fit.noise = std::max(0.0, best.params(0)) * peak;
  for (std::size_t i = 0; i < k; ++i) {
    double a = best.params(static_cast<Eigen::Index>(i) + 1);
    if (opt.mode == FitMode::kPosOnly) a = std::max(a, 0.0);
    fit.amplitudes[i] = a * peak;
  }
  fit.objective_value = best.objective * peak;
  fit.iterations = best.iterations;
  fit.converged = best.converged;

  const Eigen::VectorXd decays = psi.rightCols(static_cast<Eigen::Index>(k)) *
                                 best.params.tail(static_cast<Eigen::Index>(k));
  fit.feasible = k == 0 || decays.minCoeff() >= -1e-9;
  return fit;
}

/// s_b(t) = N + sum_k A_k psi_k(t) on the kernel grid.
inline std::vector<double> model_band(const BandFit& fit, const BandKernels& band) {
  if (fit.amplitudes.size() != band.num_decays()) {
    throw Error(ErrorCode::kShape, "fit has " + std::to_string(fit.amplitudes.size()) +
                                       " amplitudes, kernels have " +
                                       std::to_string(band.num_decays()));
  }
  const Eigen::VectorXd v = band.matrix * detail::pack(fit);
  return {v.data(), v.data() + v.size()};
}

inline BandedEnvelope model_envelope(const SlopeFit& fit, const DecayKernelSet& kernels,
                                     std::span<const double> band_centers = {}) {
  if (fit.bands.size() != kernels.num_bands()) {
    throw Error(ErrorCode::kShape, "fit and kernels disagree on the number of bands");
  }
  BandedEnvelope env;
  env.window_len = kernels.window_len;
  env.sample_rate = kernels.sample_rate;
  env.position_id = fit.position_id;
  env.band_centers.assign(band_centers.begin(), band_centers.end());
  for (std::size_t b = 0; b < fit.bands.size(); ++b) {
    env.values.push_back(model_band(fit.bands[b], kernels.bands[b]));
  }
  return env;
}

/// Fits every band of one position.
inline SlopeFit fit_position(const BandedEnvelope& env, const DecayKernelSet& kernels,
                             const FitOptions& opt) {
  if (env.num_bands() != kernels.num_bands() || env.length() != kernels.envelope_len) {
    throw Error(ErrorCode::kShape, "envelope of '" + env.position_id +
                                       "' does not share the kernel grid");
  }
  SlopeFit fit;
  fit.position_id = env.position_id;
  fit.mode = opt.mode;
  for (std::size_t b = 0; b < env.num_bands(); ++b) {
    fit.bands.push_back(fit_envelope(env.values[b], kernels.bands[b], opt));
  }
  return fit;
}

/// Batch fit over positions. Results are order-preserving and identical for
/// any thread count.
inline std::vector<SlopeFit> fit_dataset(const std::vector<BandedEnvelope>& envelopes,
                                         const DecayKernelSet& kernels, const FitOptions& opt,
                                         unsigned threads = 1) {
  for (const auto& env : envelopes) {
    if (env.num_bands() != kernels.num_bands() || env.length() != kernels.envelope_len) {
      throw Error(ErrorCode::kShape, "envelope of '" + env.position_id +
                                         "' does not share the kernel grid");
    }
  }
  std::vector<SlopeFit> out(envelopes.size());
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(envelopes.size())));
  if (threads <= 1) {
    for (std::size_t i = 0; i < envelopes.size(); ++i) {
      out[i] = fit_position(envelopes[i], kernels, opt);
    }
    return out;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < envelopes.size(); i += threads) {
            out[i] = fit_position(envelopes[i], kernels, opt);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace fadein
