#include "pfmix/datagen.hpp"

#include <cmath>

#include "pfmix/rng.hpp"

namespace pfmix {

namespace {

constexpr std::uint64_t kAnalysisStream = 0xA1;
constexpr std::uint64_t kGmmTruthStream = 0x5701;
constexpr std::uint64_t kGmmDataStream = 0x5702;
constexpr std::uint64_t kHmmTruthStream = 0x4801;
constexpr std::uint64_t kHmmDataStream = 0x4802;
constexpr double kHmmMeanGap = 6.0;

Vector normalized_ramp(int K, double offset) {
  Vector v(K);
  for (int k = 0; k < K; ++k) v(k) = offset + k;
  return v / v.sum();
}

std::vector<double> to_std(const Eigen::Ref<const Vector>& v) { return {v.data(), v.data() + v.size()}; }

std::vector<int> relevance_mask(int D, int D_rel) {
  std::vector<int> m(static_cast<std::size_t>(D), 0);
  for (int d = 0; d < D_rel; ++d) m[static_cast<std::size_t>(d)] = 1;
  return m;
}

Matrix transition_matrix(int K, double offset, Rng& rng) {
  Matrix A = Matrix::Constant(K, K, offset);
  for (int i = 0; i < K; ++i) {
    A(i, static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(K)))) += 1.0;
    A(i, i) += 1.0;
    A.row(i) /= A.row(i).sum();
  }
  return A;
}

}  // namespace

GeneratedData gen_analysis_dataset(std::size_t n, double mu, std::uint64_t seed) {
  if (n < 1) throw UsageError("gen_analysis_dataset: n must be positive");
  Rng rng(seed, kAnalysisStream);
  GeneratedData g;
  g.data.X.resize(static_cast<Eigen::Index>(n), 5);
  g.data.y.resize(n);
  g.data.n_classes = 2;
  g.truth.relevant = relevance_mask(5, 1);
  g.truth.component.resize(n);
  g.truth.irrelevant_component.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const int y = rng.bernoulli(0.5) ? 1 : 0;
    const int c = rng.bernoulli(0.5) ? 1 : 0;
    g.data.y[i] = y;
    g.truth.component[i] = y;
    g.truth.irrelevant_component[i] = c;
    g.data.X(r, 0) = rng.normal(6.0 * y, 1.0);
    for (Eigen::Index d = 1; d < 5; ++d) g.data.X(r, d) = rng.normal(mu * c, 1.0);
  }
  return g;
}

GmmParams analysis_reference_params(double mu, bool signal_aligned) {
  GmmParams p;
  p.theta = Simplex::uniform(2);
  p.pi_mean = Vector::Constant(5, mu / 2.0);
  p.pi_mean(0) = 3.0;
  p.pi_var = Vector::Constant(5, 1.0 + mu * mu / 4.0);
  p.pi_var(0) = 10.0;
  p.b_mean = p.pi_mean.transpose().replicate(2, 1);
  p.b_var = p.pi_var.transpose().replicate(2, 1);
  p.eta.resize(2, 2);
  if (signal_aligned) {
    for (int k = 0; k < 2; ++k) {
      p.b_mean(k, 0) = 6.0 * k;
      p.b_var(k, 0) = 1.0;
    }
    p.eta << 1.0, 0.0, 0.0, 1.0;
  } else {
    for (int k = 0; k < 2; ++k)
      for (int d = 1; d < 5; ++d) {
        p.b_mean(k, d) = mu * k;
        p.b_var(k, d) = 1.0;
      }
    p.eta.setConstant(0.5);
  }
  return p;
}

void GmmSweepSpec::validate() const {
  if (K_true < 1) throw UsageError("K_true must be positive");
  if (D < 1 || D_rel < 1 || D_rel > D) throw UsageError("need 1 <= D_rel <= D");
  if (!(gap > 0.0)) throw UsageError("gap must be positive");
}

GmmSweepTruth gmm_sweep_truth(const GmmSweepSpec& spec) {
  spec.validate();
  GmmSweepTruth t;
  t.theta_rel = normalized_ramp(spec.K_true, 0.5);
  t.theta_irrel = normalized_ramp(spec.K_true, 1.0);
  Rng rng(spec.seed, kGmmTruthStream);
  // Label probabilities with a degenerate overall label balance are redrawn.
  for (int attempt = 0; attempt < 10000; ++attempt) {
    t.label_prob.assign(static_cast<std::size_t>(spec.K_true), 0.0);
    double balance = 0.0;
    for (int k = 0; k < spec.K_true; ++k) {
      t.label_prob[static_cast<std::size_t>(k)] = rng.bernoulli(0.5) ? 0.95 : 0.05;
      balance += t.theta_rel(k) * t.label_prob[static_cast<std::size_t>(k)];
    }
    if (balance >= 0.1 && balance <= 0.9) return t;
  }
  throw DataError("could not draw label probabilities with a usable class balance");
}

GeneratedData gen_gmm_sweep(const GmmSweepSpec& spec, std::size_t n) {
  const auto truth = gmm_sweep_truth(spec);
  const auto theta_rel = to_std(truth.theta_rel), theta_irrel = to_std(truth.theta_irrel);
  Rng rng(spec.seed, kGmmDataStream);
  GeneratedData g;
  g.data.X.resize(static_cast<Eigen::Index>(n), spec.D);
  g.data.y.resize(n);
  g.data.n_classes = 2;
  g.truth.relevant = relevance_mask(spec.D, spec.D_rel);
  g.truth.component.resize(n);
  g.truth.irrelevant_component.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto z = static_cast<int>(rng.categorical(theta_rel));
    const auto zi = static_cast<int>(rng.categorical(theta_irrel));
    g.data.y[i] = rng.bernoulli(truth.label_prob[static_cast<std::size_t>(z)]) ? 1 : 0;
    g.truth.component[i] = z;
    g.truth.irrelevant_component[i] = zi;
    const auto r = static_cast<Eigen::Index>(i);
    for (int d = 0; d < spec.D; ++d) g.data.X(r, d) = rng.normal(spec.gap * (d < spec.D_rel ? z : zi), 1.0);
  }
  return g;
}

void HmmSweepSpec::validate() const {
  if (K_true < 1) throw UsageError("K_true must be positive");
  if (D < 1 || D_rel < 1 || D_rel > D) throw UsageError("need 1 <= D_rel <= D");
  if (label_prob.size() != static_cast<std::size_t>(K_true))
    throw UsageError("label_prob needs one entry per hidden state");
  for (double p : label_prob)
    if (!(p >= 0.0 && p <= 1.0)) throw UsageError("label_prob entries must be in [0, 1]");
}

HmmSweepTruth hmm_sweep_truth(const HmmSweepSpec& spec) {
  spec.validate();
  Rng rng(spec.seed, kHmmTruthStream);
  HmmSweepTruth t;
  t.theta = normalized_ramp(spec.K_true, 1.0);
  t.A_rel = transition_matrix(spec.K_true, 0.1, rng);
  t.A_irrel = transition_matrix(spec.K_true, 0.01, rng);
  return t;
}

GeneratedSequences gen_hmm_sweep(const HmmSweepSpec& spec, std::size_t n_seqs, std::size_t T) {
  if (n_seqs < 1 || T < 1) throw UsageError("gen_hmm_sweep: need at least one sequence of length >= 1");
  const auto truth = hmm_sweep_truth(spec);
  const auto theta = to_std(truth.theta);
  std::vector<std::vector<double>> a_rel, a_irrel;
  for (int k = 0; k < spec.K_true; ++k) {
    a_rel.push_back(to_std(truth.A_rel.row(k).transpose()));
    a_irrel.push_back(to_std(truth.A_irrel.row(k).transpose()));
  }
  Rng rng(spec.seed, kHmmDataStream);
  GeneratedSequences g;
  const std::size_t total = n_seqs * T;
  auto& d = g.data;
  d.X.resize(static_cast<Eigen::Index>(total), spec.D);
  d.y.resize(total);
  d.n_classes = 2;
  d.offsets.resize(n_seqs + 1);
  for (std::size_t n = 0; n <= n_seqs; ++n) d.offsets[n] = n * T;
  g.truth.relevant = relevance_mask(spec.D, spec.D_rel);
  g.truth.component.resize(total);
  g.truth.irrelevant_component.resize(total);
  for (std::size_t n = 0; n < n_seqs; ++n) {
    std::size_t z = 0, zi = 0;
    for (std::size_t t = 0; t < T; ++t) {
      if (t == 0) {
        z = rng.categorical(theta);
        zi = rng.categorical(theta);
      } else {
        z = rng.categorical(a_rel[z]);
        zi = rng.categorical(a_irrel[zi]);
      }
      const std::size_t i = n * T + t;
      d.y[i] = rng.bernoulli(spec.label_prob[z]) ? 1 : 0;
      g.truth.component[i] = static_cast<int>(z);
      g.truth.irrelevant_component[i] = static_cast<int>(zi);
      for (int c = 0; c < spec.D; ++c)
        d.X(static_cast<Eigen::Index>(i), c) =
            rng.normal(kHmmMeanGap * static_cast<double>(c < spec.D_rel ? z : zi), 1.0);
    }
  }
  return g;
}

}  // namespace pfmix
