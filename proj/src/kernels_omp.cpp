#include <omp.h>

#include <cmath>
#include <exception>
#include <limits>

#include "kernels_detail.hpp"

namespace pfmix::kernels::omp {

namespace {

Eigen::Index num_blocks(Eigen::Index n) {
  const auto b = static_cast<Eigen::Index>(kReductionBlock);
  return (n + b - 1) / b;
}

Eigen::Index block_begin(Eigen::Index i) { return i * static_cast<Eigen::Index>(kReductionBlock); }

Eigen::Index block_end(Eigen::Index i, Eigen::Index n) {
  const Eigen::Index e = block_begin(i + 1);
  return e < n ? e : n;
}

// Exceptions must not cross an OpenMP region boundary; capture and rethrow.
class ExceptionSlot {
 public:
  template <class F>
  void run(F&& f) noexcept {
    try {
      f();
    } catch (...) {
#pragma omp critical(pfmix_exception_slot)
      if (!ptr_) ptr_ = std::current_exception();
    }
  }
  void rethrow() const {
    if (ptr_) std::rethrow_exception(ptr_);
  }

 private:
  std::exception_ptr ptr_;
};

}  // namespace

void expected_log_emission(const Matrix& X, const GmmParams& params, const Vector& phi, Matrix& out) {
  const auto t = GaussianTables::from(params);
  out.resize(X.rows(), params.b_mean.rows());
  const Eigen::Index N = X.rows();
#pragma omp parallel for schedule(static)
  for (Eigen::Index n = 0; n < N; ++n) detail::expected_row(X, n, params, t, phi, out);
}

void blended_log_emission(const Matrix& X, const GmmParams& params, const Vector& phi, Matrix& out) {
  const auto t = GaussianTables::from(params);
  out.resize(X.rows(), params.b_mean.rows());
  const Eigen::Index N = X.rows();
#pragma omp parallel for schedule(static)
  for (Eigen::Index n = 0; n < N; ++n) detail::blended_row(X, n, params, t, phi, out);
}

void normalize_rows(const Matrix& scores, Matrix& resp, Vector& row_lse) {
  resp.resize(scores.rows(), scores.cols());
  row_lse.resize(scores.rows());
  const Eigen::Index N = scores.rows();
  ExceptionSlot slot;
#pragma omp parallel for schedule(static)
  for (Eigen::Index n = 0; n < N; ++n) slot.run([&] { detail::normalize_row(scores, n, resp, row_lse); });
  slot.rethrow();
}

Vector switch_gap(const Matrix& X, const GmmParams& params, const Matrix& resp) {
  const auto t = GaussianTables::from(params);
  const Eigen::Index N = X.rows(), D = X.cols(), B = num_blocks(N);
  Matrix partial = Matrix::Zero(B, D);
#pragma omp parallel for schedule(static)
  for (Eigen::Index b = 0; b < B; ++b)
    for (Eigen::Index n = block_begin(b); n < block_end(b, N); ++n)
      detail::gap_row(X, n, params, t, resp, partial.row(b).data());
  Vector gap = Vector::Zero(D);
  for (Eigen::Index b = 0; b < B; ++b) gap += partial.row(b).transpose();
  return gap;
}

WeightedMoments weighted_moments(const Matrix& X, const Matrix& resp) {
  const Eigen::Index N = X.rows(), D = X.cols(), K = resp.cols(), B = num_blocks(N);
  std::vector<Vector> mass_part(static_cast<std::size_t>(B), Vector::Zero(K));
  std::vector<Matrix> sum_part(static_cast<std::size_t>(B), Matrix::Zero(K, D));
#pragma omp parallel for schedule(static)
  for (Eigen::Index b = 0; b < B; ++b) {
    auto& mass = mass_part[static_cast<std::size_t>(b)];
    auto& sum = sum_part[static_cast<std::size_t>(b)];
    for (Eigen::Index n = block_begin(b); n < block_end(b, N); ++n)
      for (Eigen::Index k = 0; k < K; ++k) {
        const double r = resp(n, k);
        mass(k) += r;
        for (Eigen::Index d = 0; d < D; ++d) sum(k, d) += r * X(n, d);
      }
  }
  WeightedMoments m;
  m.mass = Vector::Zero(K);
  m.mean = Matrix::Zero(K, D);
  for (Eigen::Index b = 0; b < B; ++b) {
    m.mass += mass_part[static_cast<std::size_t>(b)];
    m.mean += sum_part[static_cast<std::size_t>(b)];
  }
  for (Eigen::Index k = 0; k < K; ++k)
    if (m.mass(k) > 0.0) m.mean.row(k) /= m.mass(k);

  for (auto& s : sum_part) s.setZero();
#pragma omp parallel for schedule(static)
  for (Eigen::Index b = 0; b < B; ++b) {
    auto& acc = sum_part[static_cast<std::size_t>(b)];
    for (Eigen::Index n = block_begin(b); n < block_end(b, N); ++n)
      for (Eigen::Index k = 0; k < K; ++k) {
        const double r = resp(n, k);
        for (Eigen::Index d = 0; d < D; ++d) {
          const double e = X(n, d) - m.mean(k, d);
          acc(k, d) += r * e * e;
        }
      }
  }
  m.var = Matrix::Zero(K, D);
  for (Eigen::Index b = 0; b < B; ++b) m.var += sum_part[static_cast<std::size_t>(b)];
  for (Eigen::Index k = 0; k < K; ++k)
    if (m.mass(k) > 0.0) m.var.row(k) /= m.mass(k);
  return m;
}

ColumnMoments column_moments(const Matrix& X) {
  const Eigen::Index N = X.rows(), D = X.cols(), B = num_blocks(N);
  Matrix part = Matrix::Zero(B, D);
#pragma omp parallel for schedule(static)
  for (Eigen::Index b = 0; b < B; ++b)
    for (Eigen::Index n = block_begin(b); n < block_end(b, N); ++n) part.row(b) += X.row(n);
  ColumnMoments c;
  c.mean = Vector::Zero(D);
  for (Eigen::Index b = 0; b < B; ++b) c.mean += part.row(b).transpose();
  c.mean /= static_cast<double>(N);

  part.setZero();
#pragma omp parallel for schedule(static)
  for (Eigen::Index b = 0; b < B; ++b)
    for (Eigen::Index n = block_begin(b); n < block_end(b, N); ++n)
      for (Eigen::Index d = 0; d < D; ++d) {
        const double e = X(n, d) - c.mean(d);
        part(b, d) += e * e;
      }
  c.var = Vector::Zero(D);
  for (Eigen::Index b = 0; b < B; ++b) c.var += part.row(b).transpose();
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
  const auto S = static_cast<std::int64_t>(out.size());
#pragma omp parallel
  {
    std::vector<double> scratch(static_cast<std::size_t>(K));
#pragma omp for schedule(dynamic, 16)
    for (std::int64_t s = 0; s < S; ++s)
      out[static_cast<std::size_t>(s)] =
          detail::config_log_joint(static_cast<std::uint64_t>(s), t, log_p, log_1mp, N, K, D, scratch.data());
  }
  return out;
}

}  // namespace pfmix::kernels::omp
