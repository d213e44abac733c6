#pragma once

#include <span>
#include <vector>

#include "pfmix/common.hpp"

namespace pfmix {

/// Multinomial logistic regression; class scores are W x + b.
struct LogRegModel {
  Matrix weights;  // C x D
  Vector bias;     // C
  double l2 = 1e-4;

  std::size_t classes() const noexcept { return static_cast<std::size_t>(weights.rows()); }
  std::size_t dims() const noexcept { return static_cast<std::size_t>(weights.cols()); }

  Matrix predict_proba(const Matrix& X) const;  // N x C
};

struct LogRegOptions {
  double l2 = 1e-4;
  int max_iters = 5000;
  double grad_tol = 1e-6;
};

struct LogRegTrace {
  std::vector<double> objective;  // one entry per accepted step, starting at the initial point
  double grad_norm = 0.0;
  bool converged = false;
};

/// Mean negative log-likelihood plus 0.5 * l2 * ||W||^2 (bias unpenalized).
double logreg_objective(const LogRegModel& m, const Matrix& X, std::span<const int> y);
/// Gradient of logreg_objective packed as [vec(W) row-major, b].
Vector logreg_gradient(const LogRegModel& m, const Matrix& X, std::span<const int> y);

/// Full-batch gradient descent with Armijo backtracking, from zero weights.
LogRegModel fit_logreg(const Matrix& X, std::span<const int> y, int n_classes, const LogRegOptions& opt = {},
                       LogRegTrace* trace = nullptr);

}  // namespace pfmix
