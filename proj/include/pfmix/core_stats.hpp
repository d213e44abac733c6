#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "pfmix/common.hpp"

namespace pfmix {

/// log(sum(exp(v))) with a max shift. Returns -inf iff every entry is -inf.
/// Throws UsageError on an empty input.
double log_sum_exp(std::span<const double> v);

/// Same as above for an Eigen row/column (no allocation).
template <class Derived>
double log_sum_exp(const Eigen::DenseBase<Derived>& v) {
  if (v.size() == 0) throw UsageError("log_sum_exp: empty input");
  const double m = v.maxCoeff();
  if (m == -std::numeric_limits<double>::infinity()) return m;
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += std::exp(v(i) - m);
  return m + std::log(s);
}

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Unchecked scalar form used inside the kernels.
inline double gaussian_log_pdf(double x, double mean, double var) {
  const double r = x - mean;
  return -0.5 * (kLog2Pi + std::log(var)) - 0.5 * r * r / var;
}

/// Diagonal Gaussian log density, summed over dimensions.
/// Throws DomainError for a nonpositive variance, UsageError on size mismatch.
double diag_gaussian_log_pdf(std::span<const double> x, std::span<const double> mean,
                             std::span<const double> var);

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// A probability vector: nonnegative entries summing to one within 1e-12.
class Simplex {
 public:
  Simplex() = default;
  /// Validates; throws DomainError if the invariants do not hold.
  explicit Simplex(Vector weights);
  explicit Simplex(const std::vector<double>& weights);

  /// Normalizes nonnegative masses; all-zero input becomes uniform.
  static Simplex normalized(const Vector& masses);
  static Simplex uniform(std::size_t k);

  const Vector& weights() const noexcept { return w_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(w_.size()); }
  double operator[](std::size_t i) const { return w_(static_cast<Eigen::Index>(i)); }

  static bool is_valid(const Vector& w, double tol = 1e-12);

 private:
  Vector w_;
};

/// ln probs[y] with the probability floor kProbFloor applied before the log.
double categorical_log_pmf(std::size_t y, const Simplex& probs);

// Floored log of a single probability; shared by every categorical term.
inline double floored_log(double prob) { return std::log(prob < kProbFloor ? kProbFloor : prob); }

}  // namespace pfmix
