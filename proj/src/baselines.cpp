#include "pfmix/baselines.hpp"

namespace pfmix {

FitResult fit_sup_gmm(const Dataset& data, EmConfig cfg) {
  cfg.p = 1.0;
  return fit(data, cfg);
}

HmmFitResult fit_sup_hmm(const SequenceDataset& data, EmConfig cfg) {
  cfg.p = 1.0;
  return hmm_fit(data, cfg);
}

Matrix TwoStepGmm::features(const Matrix& X, Backend backend) const {
  return posterior_z(generative.params, generative.phi, X, backend);
}

Matrix TwoStepGmm::predict_proba(const Matrix& X, Backend backend) const {
  return classifier.predict_proba(features(X, backend));
}

TwoStepGmm fit_2step(const Dataset& data, EmConfig cfg, const LogRegOptions& opt) {
  if (!data.labeled()) throw UsageError("fit_2step: labeled data required");
  cfg.p = 1.0;
  cfg.use_labels = false;
  TwoStepGmm m;
  m.generative = fit(data, cfg);
  m.classifier = fit_logreg(m.features(data.X, cfg.backend), data.y, data.n_classes, opt);
  return m;
}

Matrix TwoStepHmm::features(const SequenceDataset& data) const {
  Matrix F(static_cast<Eigen::Index>(data.total_steps()), static_cast<Eigen::Index>(generative.params.K()));
  for (std::size_t n = 0; n < data.num_sequences(); ++n)
    F.middleRows(static_cast<Eigen::Index>(data.offsets[n]), static_cast<Eigen::Index>(data.length(n))) =
        hmm_posterior_z(generative.params, generative.phi, data.rows(n));
  return F;
}

Matrix TwoStepHmm::predict_proba(const SequenceDataset& data) const {
  return classifier.predict_proba(features(data));
}

TwoStepHmm fit_2step_hmm(const SequenceDataset& data, EmConfig cfg, const LogRegOptions& opt) {
  if (!data.labeled()) throw UsageError("fit_2step_hmm: labeled data required");
  cfg.p = 1.0;
  cfg.use_labels = false;
  TwoStepHmm m;
  m.generative = hmm_fit(data, cfg);
  m.classifier = fit_logreg(m.features(data), data.y, data.n_classes, opt);
  return m;
}

}  // namespace pfmix
