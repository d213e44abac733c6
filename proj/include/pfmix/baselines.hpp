#pragma once

// Comparison models: supervised GMM/HMM (switches fixed on), two-step
// generative-then-discriminative pipelines, and plain logistic regression.

#include "pfmix/logreg.hpp"
#include "pfmix/pf_gmm.hpp"
#include "pfmix/pf_hmm.hpp"

namespace pfmix {

/// Unsupervised mixture followed by logistic regression on q(Z | x).
struct TwoStepGmm {
  FitResult generative;
  LogRegModel classifier;

  Matrix features(const Matrix& X, Backend backend = Backend::parallel) const;
  Matrix predict_proba(const Matrix& X, Backend backend = Backend::parallel) const;
};

/// Unsupervised HMM followed by logistic regression on per-step smoothed q(z_t | X).
struct TwoStepHmm {
  HmmFitResult generative;
  LogRegModel classifier;

  Matrix features(const SequenceDataset& data) const;  // total_steps x K
  Matrix predict_proba(const SequenceDataset& data) const;
};

/// pf fit with p forced to 1.
FitResult fit_sup_gmm(const Dataset& data, EmConfig cfg);
HmmFitResult fit_sup_hmm(const SequenceDataset& data, EmConfig cfg);

/// Step 1 ignores labels entirely (no target term, eta not learned).
TwoStepGmm fit_2step(const Dataset& data, EmConfig cfg, const LogRegOptions& opt = {});
TwoStepHmm fit_2step_hmm(const SequenceDataset& data, EmConfig cfg, const LogRegOptions& opt = {});

}  // namespace pfmix
