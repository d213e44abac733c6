#include "pfmix/core_stats.hpp"

#include <algorithm>
#include <limits>

namespace pfmix {

double log_sum_exp(std::span<const double> v) {
  if (v.empty()) throw UsageError("log_sum_exp: empty input");
  const double m = *std::max_element(v.begin(), v.end());
  if (m == -std::numeric_limits<double>::infinity()) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

double diag_gaussian_log_pdf(std::span<const double> x, std::span<const double> mean,
                             std::span<const double> var) {
  if (x.size() != mean.size() || x.size() != var.size())
    throw UsageError("diag_gaussian_log_pdf: dimension mismatch");
  double total = 0.0;
  for (std::size_t d = 0; d < x.size(); ++d) {
    if (!(var[d] > 0.0)) throw DomainError("diag_gaussian_log_pdf: nonpositive variance");
    total += gaussian_log_pdf(x[d], mean[d], var[d]);
  }
  return total;
}

bool Simplex::is_valid(const Vector& w, double tol) {
  if (w.size() == 0) return false;
  double s = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (!(w(i) >= 0.0) || !std::isfinite(w(i))) return false;
    s += w(i);
  }
  return std::abs(s - 1.0) <= tol;
}

Simplex::Simplex(Vector weights) : w_(std::move(weights)) {
  if (!is_valid(w_)) throw DomainError("Simplex: entries must be >= 0 and sum to 1");
}

Simplex::Simplex(const std::vector<double>& weights)
    : Simplex(Vector(Eigen::Map<const Vector>(weights.data(), static_cast<Eigen::Index>(weights.size())))) {}

Simplex Simplex::normalized(const Vector& masses) {
  if (masses.size() == 0) throw UsageError("Simplex::normalized: empty input");
  if ((masses.array() < 0.0).any() || !masses.allFinite())
    throw DomainError("Simplex::normalized: masses must be finite and nonnegative");
  const double s = masses.sum();
  Simplex out;
  if (s <= 0.0) {
    out.w_ = Vector::Constant(masses.size(), 1.0 / static_cast<double>(masses.size()));
  } else {
    out.w_ = masses / s;
  }
  return out;
}

Simplex Simplex::uniform(std::size_t k) {
  if (k == 0) throw UsageError("Simplex::uniform: k must be positive");
  Simplex out;
  out.w_ = Vector::Constant(static_cast<Eigen::Index>(k), 1.0 / static_cast<double>(k));
  return out;
}

double categorical_log_pmf(std::size_t y, const Simplex& probs) {
  if (y >= probs.size()) throw UsageError("categorical_log_pmf: class index out of range");
  return floored_log(probs[y]);
}

}  // namespace pfmix
