#pragma once

// Data-parallel inner loops shared by the mixture and HMM learners.
//
// Every kernel has a straightforward serial reference (kernels::serial) and an
// OpenMP version (kernels::omp). Row-wise kernels give bit-identical results
// in both. Reductions over data points in the OpenMP version are summed in
// fixed blocks of kReductionBlock rows, and block partials are combined in
// block order, so the result does not depend on the thread count; it can
// differ from the serial reference in the last bits.

#include <span>
#include <vector>

#include "pfmix/common.hpp"
#include "pfmix/params.hpp"

namespace pfmix::kernels {

inline constexpr std::size_t kReductionBlock = 256;

/// Per-(k, d) Gaussian constants so inner loops avoid calling log().
struct GaussianTables {
  Matrix b_lognorm;  // -0.5 * (log 2pi + log var)
  Matrix b_inv_var;
  Vector pi_lognorm;
  Vector pi_inv_var;

  static GaussianTables from(const GmmParams& params);
};

struct WeightedMoments {
  Vector mass;  // sum_n r_nk
  Matrix mean;  // weighted means; zero rows where mass == 0
  Matrix var;   // biased weighted variances, unfloored
};

struct ColumnMoments {
  Vector mean;
  Vector var;  // biased
};

#define PFMIX_KERNEL_DECLS                                                                                  \
  /* out(n,k) = sum_d phi_d ln N(x_nd; B_kd) + (1 - phi_d) ln N(x_nd; pi_d) */                              \
  void expected_log_emission(const Matrix& X, const GmmParams& params, const Vector& phi, Matrix& out);     \
  /* out(n,k) = sum_d ln(phi_d N(x_nd; B_kd) + (1 - phi_d) N(x_nd; pi_d)) */                                \
  void blended_log_emission(const Matrix& X, const GmmParams& params, const Vector& phi, Matrix& out);      \
  /* Row-wise normalization of log scores into responsibilities; row_lse gets each normalizer. */          \
  void normalize_rows(const Matrix& scores, Matrix& resp, Vector& row_lse);                                 \
  /* gap_d = sum_n [ sum_k r_nk ln N(x_nd; B_kd) - ln N(x_nd; pi_d) ] */                                    \
  Vector switch_gap(const Matrix& X, const GmmParams& params, const Matrix& resp);                          \
  WeightedMoments weighted_moments(const Matrix& X, const Matrix& resp);                                    \
  ColumnMoments column_moments(const Matrix& X);                                                            \
  /* Entry s: ln p(xi = bits of s) + sum_n ln sum_k theta_k [eta_{k,y_n}] prod_d p(x_nd | xi_d, k). */     \
  std::vector<double> switch_config_log_joint(const Matrix& X, std::span<const int> y,                     \
                                              const GmmParams& params, double p);

namespace serial {
PFMIX_KERNEL_DECLS
}

namespace omp {
PFMIX_KERNEL_DECLS
}

#undef PFMIX_KERNEL_DECLS

// Dispatch on Backend.
inline void expected_log_emission(const Matrix& X, const GmmParams& params, const Vector& phi, Matrix& out,
                                  Backend b) {
  b == Backend::serial ? serial::expected_log_emission(X, params, phi, out)
                       : omp::expected_log_emission(X, params, phi, out);
}
inline void blended_log_emission(const Matrix& X, const GmmParams& params, const Vector& phi, Matrix& out,
                                 Backend b) {
  b == Backend::serial ? serial::blended_log_emission(X, params, phi, out)
                       : omp::blended_log_emission(X, params, phi, out);
}
inline void normalize_rows(const Matrix& scores, Matrix& resp, Vector& row_lse, Backend b) {
  b == Backend::serial ? serial::normalize_rows(scores, resp, row_lse) : omp::normalize_rows(scores, resp, row_lse);
}
inline Vector switch_gap(const Matrix& X, const GmmParams& params, const Matrix& resp, Backend b) {
  return b == Backend::serial ? serial::switch_gap(X, params, resp) : omp::switch_gap(X, params, resp);
}
inline WeightedMoments weighted_moments(const Matrix& X, const Matrix& resp, Backend b) {
  return b == Backend::serial ? serial::weighted_moments(X, resp) : omp::weighted_moments(X, resp);
}
inline ColumnMoments column_moments(const Matrix& X, Backend b) {
  return b == Backend::serial ? serial::column_moments(X) : omp::column_moments(X);
}
inline std::vector<double> switch_config_log_joint(const Matrix& X, std::span<const int> y, const GmmParams& params,
                                                   double p, Backend b) {
  return b == Backend::serial ? serial::switch_config_log_joint(X, y, params, p)
                              : omp::switch_config_log_joint(X, y, params, p);
}

}  // namespace pfmix::kernels
