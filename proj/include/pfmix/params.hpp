#pragma once

#include <vector>

#include "pfmix/common.hpp"
#include "pfmix/core_stats.hpp"

namespace pfmix {

/// Parameters of a prediction-focused mixture:
///   theta   mixture weights (K)
///   b_mean, b_var   per-component signal Gaussians (K x D)
///   pi_mean, pi_var component-independent noise Gaussians (D)
///   eta     per-component class distributions (K x C, rows are simplexes)
struct GmmParams {
  Simplex theta;
  Matrix b_mean;
  Matrix b_var;
  Vector pi_mean;
  Vector pi_var;
  Matrix eta;

  std::size_t K() const noexcept { return static_cast<std::size_t>(b_mean.rows()); }
  std::size_t D() const noexcept { return static_cast<std::size_t>(b_mean.cols()); }
  std::size_t C() const noexcept { return static_cast<std::size_t>(eta.cols()); }

  /// Throws DomainError when a simplex or variance-floor invariant is violated.
  void validate() const;
  bool all_finite() const;
};

/// Tied per-dimension switch posterior, each entry in [0, 1].
class SwitchPosterior {
 public:
  SwitchPosterior() = default;
  explicit SwitchPosterior(Vector phi);
  static SwitchPosterior constant(std::size_t d, double value);

  const Vector& values() const noexcept { return phi_; }
  double operator[](std::size_t d) const { return phi_(static_cast<Eigen::Index>(d)); }
  std::size_t size() const noexcept { return static_cast<std::size_t>(phi_.size()); }

 private:
  Vector phi_;
};

/// Posterior over components, one simplex row per datum (or time step).
struct Responsibilities {
  Matrix r;
};

struct EmConfig {
  double p = 0.5;        // switch prior
  int K = 2;             // component budget
  int max_iters = 500;
  double rel_tol = 1e-6;
  int n_restarts = 5;
  double alpha = 1.0;    // symmetric Dirichlet concentration on theta, >= 1
  std::uint64_t seed = 0;
  bool use_labels = true;  // false: Y is ignored in the E-step and eta is not learned
  Backend backend = Backend::parallel;

  /// Switch prior actually used: 0 and 1 pass through, anything else is
  /// clamped to [1e-6, 1 - 1e-6].
  double effective_p() const;
  void validate() const;
};

template <class Params>
struct BasicFitResult {
  Params params;
  SwitchPosterior phi;
  std::vector<double> elbo_trace;
  bool converged = false;
  int iterations = 0;
  std::uint64_t seed = 0;
  int best_restart = 0;
  std::size_t rescues = 0;  // empty-component reseeds in the winning run
};

using FitResult = BasicFitResult<GmmParams>;

}  // namespace pfmix
