#pragma once

// Seeded synthetic data. Every generator draws from its own Philox stream,
// so regenerating with the same arguments is bit-exact.

#include <vector>

#include "pfmix/data.hpp"
#include "pfmix/pf_hmm.hpp"

namespace pfmix {

/// Ground truth kept next to a generated dataset.
struct GroundTruth {
  std::vector<int> relevant;            // D entries, 1 for signal dimensions
  std::vector<int> component;           // per datum / step: relevant-block component
  std::vector<int> irrelevant_component;  // per datum / step: irrelevant-block component
};

struct GeneratedData {
  Dataset data;
  GroundTruth truth;
};

struct GeneratedSequences {
  SequenceDataset data;
  GroundTruth truth;
};

/// Analysis example: x0 ~ N(6 y, 1) with y ~ Bern(0.5); x1..x4 share one
/// component c ~ Bern(0.5) with mean mu * c and unit variance. D = 5.
GeneratedData gen_analysis_dataset(std::size_t n, double mu = 6.0, std::uint64_t seed = 0);

/// Population parameters of the two competing two-component solutions on the
/// analysis data: signal-aligned (components follow y) or noise-aligned
/// (components follow the x1..x4 cluster).
GmmParams analysis_reference_params(double mu, bool signal_aligned);

struct GmmSweepSpec {
  int K_true = 10;
  int D = 100;
  int D_rel = 10;
  double gap = 6.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Resolved generator parameters (after label-probability resampling).
struct GmmSweepTruth {
  Vector theta_rel;
  Vector theta_irrel;
  std::vector<double> label_prob;  // p_k per relevant component
};

GmmSweepTruth gmm_sweep_truth(const GmmSweepSpec& spec);
GeneratedData gen_gmm_sweep(const GmmSweepSpec& spec, std::size_t n);

struct HmmSweepSpec {
  int K_true = 4;
  int D = 20;
  int D_rel = 2;
  std::uint64_t seed = 0;
  std::vector<double> label_prob{0.05, 0.95, 0.05, 0.95};

  void validate() const;
};

struct HmmSweepTruth {
  Vector theta;
  Matrix A_rel;
  Matrix A_irrel;
};

HmmSweepTruth hmm_sweep_truth(const HmmSweepSpec& spec);
GeneratedSequences gen_hmm_sweep(const HmmSweepSpec& spec, std::size_t n_seqs, std::size_t T);

}  // namespace pfmix
