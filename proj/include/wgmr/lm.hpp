#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

namespace wgmr::fit {

struct LmOptions {
  int max_iterations = 200;
  /// Converged once every Jacobian column is orthogonal to the residual to
  /// within this cosine.
  double gradient_tolerance = 1e-10;
  /// Converged once the residual norm falls below this (zero-residual fits).
  double residual_tolerance = 0;
  /// Converged once no step longer than this, relative to the parameter
  /// vector, lowers the cost. Catches minima on a kink of the model and
  /// noisy fits whose cost stops resolving the gradient.
  double step_tolerance = 1e-10;
  /// Relative singular-value floor of the column-normalized Jacobian.
  double rank_tolerance = 1e-10;
};

struct LmSummary {
  Eigen::VectorXd params;
  Eigen::MatrixXd covariance;  // (J^T J)^+ in the problem's parameter units
  double residual_norm = 0;
  double gradient_measure = 0;
  int iterations = 0;
  bool converged = false;
  bool full_rank = true;
};

namespace detail {

inline double gradient_cosine(const Eigen::MatrixXd& jac,
                              const Eigen::VectorXd& res) {
  const double rnorm = res.norm();
  if (rnorm == 0) return 0;
  const Eigen::VectorXd g = jac.transpose() * res;
  double worst = 0;
  for (Eigen::Index j = 0; j < jac.cols(); ++j) {
    const double cnorm = jac.col(j).norm();
    if (cnorm > 0) worst = std::max(worst, std::abs(g(j)) / (cnorm * rnorm));
  }
  return worst;
}

}  // namespace detail

/// Damped Gauss-Newton with Marquardt's diagonal scaling.
///
/// `Problem` provides `residuals(p)` (already weighted) and `jacobian(p)`.
/// The iteration is fully deterministic.
template <typename Problem>
LmSummary levenberg_marquardt(const Problem& problem, Eigen::VectorXd params,
                              const LmOptions& options = {}) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;

  VectorXd res = problem.residuals(params);
  MatrixXd jac = problem.jacobian(params);
  double cost = res.squaredNorm();
  double lambda = 1e-3;

  LmSummary out;
  bool stalled = false;
  auto tiny = [&](const VectorXd& step) {
    return step.norm() <= options.step_tolerance * (params.norm() + options.step_tolerance);
  };
  auto done = [&] {
    return stalled || res.norm() <= options.residual_tolerance ||
           detail::gradient_cosine(jac, res) <= options.gradient_tolerance;
  };

  int it = 0;
  while (it < options.max_iterations && !done()) {
    ++it;
    const MatrixXd normal = jac.transpose() * jac;
    const VectorXd grad = jac.transpose() * res;
    VectorXd diag = normal.diagonal();
    const double diag_max = diag.maxCoeff();
    const double floor = diag_max > 0 ? 1e-12 * diag_max : 1.0;
    diag = diag.cwiseMax(floor);

    bool accepted = false;
    while (lambda < 1e16) {
      MatrixXd damped = normal;
      damped.diagonal() += lambda * diag;
      const VectorXd step = damped.ldlt().solve(-grad);
      if (!step.allFinite()) {
        lambda *= 10;
        continue;
      }
      const VectorXd trial = params + step;
      const VectorXd trial_res = problem.residuals(trial);
      const double trial_cost = trial_res.allFinite()
                                    ? trial_res.squaredNorm()
                                    : std::numeric_limits<double>::infinity();
      if (trial_cost < cost) {
        stalled = tiny(step);
        params = trial;
        res = trial_res;
        cost = trial_cost;
        jac = problem.jacobian(params);
        lambda = std::max(lambda * 0.3, 1e-12);
        accepted = true;
        break;
      }
      if (tiny(step)) {
        stalled = true;
        break;
      }
      lambda *= 10;
    }
    if (!accepted) break;
  }

  out.params = params;
  out.iterations = it;
  out.residual_norm = res.norm();
  out.gradient_measure = detail::gradient_cosine(jac, res);
  out.converged = done();

  // Rank and covariance on the column-normalized Jacobian.
  const Eigen::Index p = jac.cols();
  VectorXd col_norm(p);
  for (Eigen::Index j = 0; j < p; ++j) col_norm(j) = jac.col(j).norm();
  const double max_norm = col_norm.maxCoeff();
  out.full_rank = max_norm > 0;
  MatrixXd scaled = jac;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (!(col_norm(j) > 1e-12 * max_norm)) {
      out.full_rank = false;
      col_norm(j) = 1;
    }
    scaled.col(j) /= col_norm(j);
  }
  Eigen::JacobiSVD<MatrixXd> svd(scaled, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd sv = svd.singularValues();
  if (sv.size() == 0 || sv(sv.size() - 1) <= options.rank_tolerance * sv(0))
    out.full_rank = false;
  VectorXd inv_sq = VectorXd::Zero(sv.size());
  for (Eigen::Index k = 0; k < sv.size(); ++k)
    if (sv(k) > options.rank_tolerance * sv(0)) inv_sq(k) = 1 / (sv(k) * sv(k));
  const MatrixXd scaled_cov =
      svd.matrixV() * inv_sq.asDiagonal() * svd.matrixV().transpose();
  const VectorXd inv_norm = col_norm.cwiseInverse();
  out.covariance = inv_norm.asDiagonal() * scaled_cov * inv_norm.asDiagonal();
  return out;
}

}  // namespace wgmr::fit
