#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace fadein {

struct QpResult {
  Eigen::VectorXd x;
  std::vector<int> working_set;
  int changes = 0;
  bool converged = false;
};

/// Primal active-set solver for the convex problem
///
///   minimize 0.5 x'Hx + g'x   subject to  C x >= d
///
/// starting from a feasible `x0`. H must be positive semidefinite and positive
/// definite on the null space of every working set encountered (callers add a
/// small ridge). At most `max_changes` working-set changes are made.
inline QpResult solve_inequality_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                                    const Eigen::MatrixXd& C, const Eigen::VectorXd& d,
                                    const Eigen::VectorXd& x0, int max_changes = 2000) {
  const Eigen::Index n = H.rows();
  const Eigen::Index m = C.rows();
  QpResult res;
  res.x = x0;
  std::vector<char> in_set(static_cast<std::size_t>(m), 0);

  const double h_scale = std::max(1.0, H.cwiseAbs().maxCoeff());
  for (int iter = 0; iter <= max_changes; ++iter) {
    const auto w = static_cast<Eigen::Index>(res.working_set.size());
    const Eigen::VectorXd grad = H * res.x + g;

    // Null-space step: p = Z q keeps every working constraint exactly active.
    Eigen::MatrixXd a(w, n);
    for (Eigen::Index j = 0; j < w; ++j) a.row(j) = C.row(res.working_set[static_cast<std::size_t>(j)]);
    Eigen::MatrixXd z = Eigen::MatrixXd::Identity(n, n);
    if (w > 0) {
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
      svd.setThreshold(1e-12);
      z = svd.matrixV().rightCols(n - svd.rank());
    }
    Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
    if (z.cols() > 0) {
      const Eigen::MatrixXd hz = z.transpose() * H * z;
      p = z * hz.ldlt().solve(-(z.transpose() * grad));
    }

    const double x_scale = 1.0 + res.x.cwiseAbs().maxCoeff();
    if (!p.allFinite() || p.cwiseAbs().maxCoeff() <= 1e-14 * x_scale) {
      if (w == 0) {
        res.converged = true;
        return res;
      }
      const Eigen::VectorXd lambda = a.transpose().colPivHouseholderQr().solve(grad);
      Eigen::Index worst = 0;
      const double min_lambda = lambda.minCoeff(&worst);
      if (min_lambda >= -1e-14 * h_scale * x_scale) {
        res.converged = true;
        return res;
      }
      in_set[static_cast<std::size_t>(res.working_set[static_cast<std::size_t>(worst)])] = 0;
      res.working_set.erase(res.working_set.begin() + worst);
      ++res.changes;
      continue;
    }

    double alpha = 1.0;
    int blocking = -1;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (in_set[static_cast<std::size_t>(i)]) continue;
      const double cp = C.row(i).dot(p);
      if (cp >= -1e-13 * C.row(i).norm() * p.norm()) continue;
      const double slack = std::max(0.0, C.row(i).dot(res.x) - d(i));
      const double ratio = slack / -cp;
      if (ratio < alpha) {
        alpha = ratio;
        blocking = static_cast<int>(i);
      }
    }
    res.x += alpha * p;
    if (blocking >= 0) {
      in_set[static_cast<std::size_t>(blocking)] = 1;
      res.working_set.push_back(blocking);
      ++res.changes;
    }
  }
  return res;
}

}  // namespace fadein
