#include "pfmix/logreg.hpp"

#include <cmath>
#include <vector>

#include "pfmix/core_stats.hpp"

namespace pfmix {

namespace {

Matrix scores(const LogRegModel& m, const Matrix& X) {
  Matrix s = X * m.weights.transpose();
  s.rowwise() += m.bias.transpose();
  return s;
}

void check_inputs(const Matrix& X, std::span<const int> y, int n_classes) {
  if (!X.allFinite()) throw DataError("logistic regression: non-finite features");
  if (y.size() != static_cast<std::size_t>(X.rows())) throw DataError("logistic regression: label count mismatch");
  for (int v : y)
    if (v < 0 || v >= n_classes) throw DataError("logistic regression: label out of range");
}

Vector pack(const LogRegModel& m) {
  Vector v(m.weights.size() + m.bias.size());
  v.head(m.weights.size()) = Eigen::Map<const Vector>(m.weights.data(), m.weights.size());
  v.tail(m.bias.size()) = m.bias;
  return v;
}

void unpack(const Vector& v, LogRegModel& m) {
  Eigen::Map<Vector>(m.weights.data(), m.weights.size()) = v.head(m.weights.size());
  m.bias = v.tail(m.bias.size());
}

}  // namespace

Matrix LogRegModel::predict_proba(const Matrix& X) const {
  if (static_cast<std::size_t>(X.cols()) != dims()) throw DataError("logistic regression: feature count mismatch");
  Matrix p = scores(*this, X);
  for (Eigen::Index n = 0; n < p.rows(); ++n) {
    const double lse = log_sum_exp(p.row(n));
    p.row(n) = (p.row(n).array() - lse).exp().matrix();
  }
  return p;
}

double logreg_objective(const LogRegModel& m, const Matrix& X, std::span<const int> y) {
  const Matrix s = scores(m, X);
  double nll = 0.0;
  for (Eigen::Index n = 0; n < s.rows(); ++n) nll += log_sum_exp(s.row(n)) - s(n, y[static_cast<std::size_t>(n)]);
  return nll / static_cast<double>(X.rows()) + 0.5 * m.l2 * m.weights.squaredNorm();
}

Vector logreg_gradient(const LogRegModel& m, const Matrix& X, std::span<const int> y) {
  Matrix resid = m.predict_proba(X);
  for (Eigen::Index n = 0; n < resid.rows(); ++n) resid(n, y[static_cast<std::size_t>(n)]) -= 1.0;
  resid /= static_cast<double>(X.rows());
  LogRegModel g = m;
  g.weights = resid.transpose() * X + m.l2 * m.weights;
  g.bias = resid.colwise().sum().transpose();
  return pack(g);
}

LogRegModel fit_logreg(const Matrix& X, std::span<const int> y, int n_classes, const LogRegOptions& opt,
                       LogRegTrace* trace) {
  if (n_classes < 2) throw UsageError("logistic regression needs at least two classes");
  if (X.rows() == 0) throw DataError("logistic regression: no data");
  check_inputs(X, y, n_classes);
  if (!(opt.l2 >= 0.0)) throw UsageError("l2 must be nonnegative");

  LogRegModel m;
  m.weights = Matrix::Zero(n_classes, X.cols());
  m.bias = Vector::Zero(n_classes);
  m.l2 = opt.l2;

  double f = logreg_objective(m, X, y);
  Vector g = logreg_gradient(m, X, y);
  double step = 1.0;
  LogRegTrace local;
  local.objective.push_back(f);
  for (int it = 0; it < opt.max_iters; ++it) {
    const double gg = g.squaredNorm();
    local.grad_norm = std::sqrt(gg);
    if (local.grad_norm <= opt.grad_tol) {
      local.converged = true;
      break;
    }
    const Vector w = pack(m);
    LogRegModel cand = m;
    double fc = f;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      unpack(w - step * g, cand);
      fc = logreg_objective(cand, X, y);
      if (fc <= f - 1e-4 * step * gg) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no descent left at machine precision
    m = std::move(cand);
    f = fc;
    g = logreg_gradient(m, X, y);
    local.objective.push_back(f);
    step *= 2.0;
  }
  local.grad_norm = g.norm();
  local.converged = local.converged || local.grad_norm <= opt.grad_tol;
  if (trace) *trace = std::move(local);
  return m;
}

}  // namespace pfmix
