#pragma once

// One type for every fitted model the CLI and evaluation code handle.

#include <string>
#include <string_view>
#include <variant>

#include "pfmix/baselines.hpp"

namespace pfmix {

enum class ModelKind { pf_gmm, sup_gmm, two_step_gmm, pf_hmm, sup_hmm, two_step_hmm, logreg };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);  // UsageError on unknown names
bool is_sequence_kind(ModelKind kind);
/// Kinds whose fit depends on the switch prior p.
bool uses_switch_prior(ModelKind kind);

struct MixtureModel {
  GmmParams params;
  SwitchPosterior phi;
};

struct HmmModel {
  HmmParams params;
  SwitchPosterior phi;
};

struct TwoStepGmmModel {
  GmmParams params;
  SwitchPosterior phi;
  LogRegModel classifier;
};

struct TwoStepHmmModel {
  HmmParams params;
  SwitchPosterior phi;
  LogRegModel classifier;
};

struct Model {
  ModelKind kind = ModelKind::pf_gmm;
  std::variant<MixtureModel, HmmModel, TwoStepGmmModel, TwoStepHmmModel, LogRegModel> body;
  double p = 1.0;  // switch prior used for fitting; 1 for the switch-free kinds
  int K = 0;
  std::uint64_t seed = 0;
  std::vector<double> elbo_trace;
  bool converged = false;
  int iterations = 0;

  std::size_t dims() const;
  std::size_t classes() const;
  /// Switch posterior of the generative part, if the model has one.
  const SwitchPosterior* switches() const;
};

struct FitOptions {
  EmConfig em;
  LogRegOptions logreg;
};

/// Fits any kind. Sequence kinds need sequence data; flat kinds given
/// sequence data treat every time step as an independent datum.
Model fit_model(ModelKind kind, const Dataset& data, const FitOptions& opt);
Model fit_model(ModelKind kind, const SequenceDataset& data, const FitOptions& opt);

/// Class probabilities, one row per datum (or per time step).
Matrix predict_proba(const Model& model, const Dataset& data);
Matrix predict_proba(const Model& model, const SequenceDataset& data);

}  // namespace pfmix
