#pragma once

// Per-row building blocks shared by the serial and OpenMP kernels so that the
// row-wise results are bit-identical between the two.

#include <cmath>
#include <limits>
#include <span>

#include "pfmix/core_stats.hpp"
#include "pfmix/kernels.hpp"

namespace pfmix::kernels::detail {

inline double table_log_pdf(double x, double mean, double lognorm, double inv_var) {
  const double r = x - mean;
  return lognorm - 0.5 * r * r * inv_var;
}

inline void expected_row(const Matrix& X, Eigen::Index n, const GmmParams& params, const GaussianTables& t,
                         const Vector& phi, Matrix& out) {
  const Eigen::Index K = params.b_mean.rows();
  const Eigen::Index D = params.b_mean.cols();
  double noise = 0.0;
  for (Eigen::Index d = 0; d < D; ++d) {
    const double w = 1.0 - phi(d);
    if (w != 0.0) noise += w * table_log_pdf(X(n, d), params.pi_mean(d), t.pi_lognorm(d), t.pi_inv_var(d));
  }
  for (Eigen::Index k = 0; k < K; ++k) {
    double s = noise;
    for (Eigen::Index d = 0; d < D; ++d) {
      const double w = phi(d);
      if (w != 0.0) s += w * table_log_pdf(X(n, d), params.b_mean(k, d), t.b_lognorm(k, d), t.b_inv_var(k, d));
    }
    out(n, k) = s;
  }
}

inline void blended_row(const Matrix& X, Eigen::Index n, const GmmParams& params, const GaussianTables& t,
                        const Vector& phi, Matrix& out) {
  const Eigen::Index K = params.b_mean.rows();
  const Eigen::Index D = params.b_mean.cols();
  for (Eigen::Index k = 0; k < K; ++k) {
    double s = 0.0;
    for (Eigen::Index d = 0; d < D; ++d) {
      const double x = X(n, d);
      const double f = phi(d);
      if (f == 1.0) {
        s += table_log_pdf(x, params.b_mean(k, d), t.b_lognorm(k, d), t.b_inv_var(k, d));
      } else if (f == 0.0) {
        s += table_log_pdf(x, params.pi_mean(d), t.pi_lognorm(d), t.pi_inv_var(d));
      } else {
        const double a = std::log(f) + table_log_pdf(x, params.b_mean(k, d), t.b_lognorm(k, d), t.b_inv_var(k, d));
        const double b = std::log1p(-f) + table_log_pdf(x, params.pi_mean(d), t.pi_lognorm(d), t.pi_inv_var(d));
        const double m = a > b ? a : b;
        s += m + std::log1p(std::exp(-(a > b ? a - b : b - a)));
      }
    }
    out(n, k) = s;
  }
}

inline void normalize_row(const Matrix& scores, Eigen::Index n, Matrix& resp, Vector& row_lse) {
  const double lse = log_sum_exp(scores.row(n));
  if (!std::isfinite(lse)) throw NumericError("responsibility normalizer is not finite");
  row_lse(n) = lse;
  for (Eigen::Index k = 0; k < scores.cols(); ++k) resp(n, k) = std::exp(scores(n, k) - lse);
}

// Adds row n's contribution to the per-dimension signal-vs-noise gap.
inline void gap_row(const Matrix& X, Eigen::Index n, const GmmParams& params, const GaussianTables& t,
                    const Matrix& resp, double* gap) {
  const Eigen::Index K = params.b_mean.rows();
  const Eigen::Index D = params.b_mean.cols();
  for (Eigen::Index d = 0; d < D; ++d) {
    const double x = X(n, d);
    double sig = 0.0;
    for (Eigen::Index k = 0; k < K; ++k) {
      const double r = resp(n, k);
      if (r != 0.0) sig += r * table_log_pdf(x, params.b_mean(k, d), t.b_lognorm(k, d), t.b_inv_var(k, d));
    }
    gap[d] += sig - table_log_pdf(x, params.pi_mean(d), t.pi_lognorm(d), t.pi_inv_var(d));
  }
}

struct EnumerationTables {
  Matrix signal;      // (N*K) x D : ln N(x_nd; B_kd), row n*K + k
  Matrix noise;       // N x D     : ln N(x_nd; pi_d)
  Matrix prior_term;  // N x K     : ln theta_k [+ ln eta_{k,y_n}]
};

EnumerationTables enumeration_tables(const Matrix& X, std::span<const int> y, const GmmParams& params);

inline double config_log_joint(std::uint64_t config, const EnumerationTables& t, double log_p, double log_1mp,
                               Eigen::Index N, Eigen::Index K, Eigen::Index D, double* scratch) {
  double prior = 0.0;
  for (Eigen::Index d = 0; d < D; ++d) {
    const bool on = (config >> d) & 1U;
    prior += on ? log_p : log_1mp;
  }
  if (prior == -std::numeric_limits<double>::infinity()) return prior;
  double total = prior;
  for (Eigen::Index n = 0; n < N; ++n) {
    double m = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < K; ++k) {
      double s = t.prior_term(n, k);
      const Eigen::Index row = n * K + k;
      for (Eigen::Index d = 0; d < D; ++d) s += ((config >> d) & 1U) ? t.signal(row, d) : t.noise(n, d);
      scratch[k] = s;
      if (s > m) m = s;
    }
    if (m == -std::numeric_limits<double>::infinity()) return m;
    double acc = 0.0;
    for (Eigen::Index k = 0; k < K; ++k) acc += std::exp(scratch[k] - m);
    total += m + std::log(acc);
  }
  return total;
}

void check_enumerable(const GmmParams& params, double p);

}  // namespace pfmix::kernels::detail
