#include <cmath>
#include <limits>

#include "kernels_detail.hpp"

namespace pfmix::kernels {

GaussianTables GaussianTables::from(const GmmParams& params) {
  GaussianTables t;
  t.b_lognorm = (-0.5 * (kLog2Pi + params.b_var.array().log())).matrix();
  t.b_inv_var = params.b_var.array().inverse().matrix();
  t.pi_lognorm = (-0.5 * (kLog2Pi + params.pi_var.array().log())).matrix();
  t.pi_inv_var = params.pi_var.array().inverse().matrix();
  return t;
}

namespace detail {

EnumerationTables enumeration_tables(const Matrix& X, std::span<const int> y, const GmmParams& params) {
  const Eigen::Index N = X.rows(), K = params.b_mean.rows(), D = params.b_mean.cols();
  const auto g = GaussianTables::from(params);
  EnumerationTables t;
  t.signal.resize(N * K, D);
  t.noise.resize(N, D);
  t.prior_term.resize(N, K);
  for (Eigen::Index n = 0; n < N; ++n) {
    for (Eigen::Index d = 0; d < D; ++d)
      t.noise(n, d) = table_log_pdf(X(n, d), params.pi_mean(d), g.pi_lognorm(d), g.pi_inv_var(d));
    for (Eigen::Index k = 0; k < K; ++k) {
      for (Eigen::Index d = 0; d < D; ++d)
        t.signal(n * K + k, d) = table_log_pdf(X(n, d), params.b_mean(k, d), g.b_lognorm(k, d), g.b_inv_var(k, d));
      double pt = std::log(params.theta[static_cast<std::size_t>(k)]);
      if (!y.empty()) pt += floored_log(params.eta(k, y[static_cast<std::size_t>(n)]));
      t.prior_term(n, k) = pt;
    }
  }
  return t;
}

void check_enumerable(const GmmParams& params, double p) {
  if (params.D() > 20) throw UsageError("switch enumeration supports D <= 20; use the ELBO for larger inputs");
  if (!(p >= 0.0 && p <= 1.0)) throw UsageError("switch prior must be in [0, 1]");
}

}  // namespace detail

namespace serial {

void expected_log_emission(const Matrix& X, const GmmParams& params, const Vector& phi, Matrix& out) {
  const auto t = GaussianTables::from(params);
  out.resize(X.rows(), params.b_mean.rows());
  for (Eigen::Index n = 0; n < X.rows(); ++n) detail::expected_row(X, n, params, t, phi, out);
}

void blended_log_emission(const Matrix& X, const GmmParams& params, const Vector& phi, Matrix& out) {
  const auto t = GaussianTables::from(params);
  out.resize(X.rows(), params.b_mean.rows());
  for (Eigen::Index n = 0; n < X.rows(); ++n) detail::blended_row(X, n, params, t, phi, out);
}

void normalize_rows(const Matrix& scores, Matrix& resp, Vector& row_lse) {
  resp.resize(scores.rows(), scores.cols());
  row_lse.resize(scores.rows());
  for (Eigen::Index n = 0; n < scores.rows(); ++n) detail::normalize_row(scores, n, resp, row_lse);
}

Vector switch_gap(const Matrix& X, const GmmParams& params, const Matrix& resp) {
  const auto t = GaussianTables::from(params);
  Vector gap = Vector::Zero(X.cols());
  for (Eigen::Index n = 0; n < X.rows(); ++n) detail::gap_row(X, n, params, t, resp, gap.data());
  return gap;
}

WeightedMoments weighted_moments(const Matrix& X, const Matrix& resp) {
  const Eigen::Index N = X.rows(), D = X.cols(), K = resp.cols();
  WeightedMoments m;
  m.mass = Vector::Zero(K);
  m.mean = Matrix::Zero(K, D);
  m.var = Matrix::Zero(K, D);
  for (Eigen::Index n = 0; n < N; ++n)
    for (Eigen::Index k = 0; k < K; ++k) {
      const double r = resp(n, k);
      m.mass(k) += r;
      for (Eigen::Index d = 0; d < D; ++d) m.mean(k, d) += r * X(n, d);
    }
  for (Eigen::Index k = 0; k < K; ++k)
    if (m.mass(k) > 0.0) m.mean.row(k) /= m.mass(k);
  for (Eigen::Index n = 0; n < N; ++n)
    for (Eigen::Index k = 0; k < K; ++k) {
      const double r = resp(n, k);
      for (Eigen::Index d = 0; d < D; ++d) {
        const double e = X(n, d) - m.mean(k, d);
        m.var(k, d) += r * e * e;
      }
    }
  for (Eigen::Index k = 0; k < K; ++k)
    if (m.mass(k) > 0.0) m.var.row(k) /= m.mass(k);
  return m;
}

ColumnMoments column_moments(const Matrix& X) {
  const Eigen::Index N = X.rows(), D = X.cols();
  ColumnMoments c;
  c.mean = Vector::Zero(D);
  c.var = Vector::Zero(D);
  for (Eigen::Index n = 0; n < N; ++n)
    for (Eigen::Index d = 0; d < D; ++d) c.mean(d) += X(n, d);
  c.mean /= static_cast<double>(N);
  for (Eigen::Index n = 0; n < N; ++n)
    for (Eigen::Index d = 0; d < D; ++d) {
      const double e = X(n, d) - c.mean(d);
      c.var(d) += e * e;
    }
  c.var /= static_cast<double>(N);
  return c;
}

std::vector<double> switch_config_log_joint(const Matrix& X, std::span<const int> y, const GmmParams& params,
                                            double p) {
  detail::check_enumerable(params, p);
  const auto t = detail::enumeration_tables(X, y, params);
  const Eigen::Index N = X.rows(), K = params.b_mean.rows(), D = params.b_mean.cols();
  const double log_p = std::log(p), log_1mp = std::log1p(-p);
  std::vector<double> out(std::size_t{1} << D);
  std::vector<double> scratch(static_cast<std::size_t>(K));
  for (std::uint64_t s = 0; s < out.size(); ++s)
    out[s] = detail::config_log_joint(s, t, log_p, log_1mp, N, K, D, scratch.data());
  return out;
}

}  // namespace serial
}  // namespace pfmix::kernels
