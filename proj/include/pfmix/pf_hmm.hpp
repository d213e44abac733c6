#pragma once

// Prediction-focused HMM. Emissions, noise and target heads are the mixture
// parameters; theta doubles as the initial-state distribution and A holds
// the state transitions. One switch posterior phi_d is shared by every time
// step of every sequence.

#include <span>
#include <vector>

#include "pfmix/data.hpp"
#include "pfmix/params.hpp"
#include "pfmix/rng.hpp"

namespace pfmix {

struct HmmParams {
  GmmParams gmm;
  Matrix A;  // K x K, rows are simplexes

  std::size_t K() const noexcept { return gmm.K(); }
  std::size_t D() const noexcept { return gmm.D(); }
  std::size_t C() const noexcept { return gmm.C(); }
  void validate() const;
  bool all_finite() const { return gmm.all_finite() && A.allFinite(); }
};

using HmmFitResult = BasicFitResult<HmmParams>;

/// Smoothed marginals of one sequence.
struct StatePosteriors {
  Matrix gamma;             // T x K
  std::vector<Matrix> edge;  // T-1 slices, edge[t](j, k) = q(z_t = j, z_{t+1} = k)
  double loglik = 0.0;      // log normalizer of the chain
};

/// Per-step log emission scores for one sequence, split so the first step can
/// be combined with theta in the same order as the mixture E-step.
struct ChainScores {
  Matrix emission;  // T x K, expected log emission under phi
  Matrix target;    // T x K, ln eta_{k, y_t}, or empty
};

ChainScores chain_scores(const HmmParams& params, const SwitchPosterior& phi, const Matrix& X, std::span<const int> y,
                         bool use_y);

/// Log-space forward-backward on precomputed scores.
StatePosteriors forward_backward(const HmmParams& params, const ChainScores& scores, bool with_edges = true);

StatePosteriors forward_backward(const HmmParams& params, const SwitchPosterior& phi, const Matrix& X,
                                 std::span<const int> y, bool use_y);

/// Log normalizer from the forward pass only (no smoothing).
double forward_loglik(const HmmParams& params, const ChainScores& scores);
/// Same quantity from the backward pass; used to cross-check the recursions.
double backward_loglik(const HmmParams& params, const ChainScores& scores);

/// E-step over all sequences, parallel across sequences.
std::vector<StatePosteriors> hmm_e_step(const HmmParams& params, const SwitchPosterior& phi,
                                        const SequenceDataset& data, bool use_y, Backend backend = Backend::parallel);

/// Stacked gamma rows (sum_n T_n x K) in data order.
Responsibilities stack_gamma(const std::vector<StatePosteriors>& post, const SequenceDataset& data);

/// Emission, noise, target and theta updates pooled over all (n, t), plus the
/// transition update from expected transition counts. Rows of A with no
/// expected outgoing transitions keep their previous values.
HmmParams hmm_m_step(const std::vector<StatePosteriors>& post, const SwitchPosterior& phi,
                     const SequenceDataset& data, const EmConfig& cfg, const HmmParams& previous, Rng& rng,
                     std::size_t* rescued = nullptr);

/// ELBO with q(Z) at the exact chain posterior for (params, phi):
/// sum_n loglik_n + (sum_n T_n) * switch_kl_term(phi, p).
double hmm_elbo(const HmmParams& params, const SwitchPosterior& phi, const SequenceDataset& data, double p,
                bool use_y = true, Backend backend = Backend::parallel);

HmmParams init_hmm_params(const SequenceDataset& data, const EmConfig& cfg, std::uint64_t stream = 0);

HmmFitResult hmm_fit(const SequenceDataset& data, const EmConfig& cfg);

/// Per-step class probabilities sum_k gamma_t(k) eta_k with gamma from X only (T x C).
Matrix hmm_predict_proba(const HmmParams& params, const SwitchPosterior& phi, const Matrix& X);

/// Smoothed q(z_t | X) for each step of one sequence (T x K).
Matrix hmm_posterior_z(const HmmParams& params, const SwitchPosterior& phi, const Matrix& X);

}  // namespace pfmix
