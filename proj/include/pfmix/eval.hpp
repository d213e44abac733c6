#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pfmix/model.hpp"

namespace pfmix {

/// Rank AUROC with midranks for ties. Labels are 0/1; both must occur,
/// otherwise DomainError.
double auroc(std::span<const double> scores, std::span<const int> labels);

/// Binary: AUROC of the class-1 column. More classes: one-vs-rest, macro
/// average over classes that have both positives and negatives in `labels`.
double multiclass_auroc(const Matrix& proba, std::span<const int> labels);

/// AUROC of phi against a 0/1 relevance mask.
double switch_recovery(const SwitchPosterior& phi, std::span<const int> mask);

/// Exact held-out log terms. Flat models: one entry per datum. Sequence
/// models: one entry per sequence. Switches are treated per datum, i.e.
/// p(x_d | z) = phi_d N(x_d; B_zd) + (1 - phi_d) N(x_d; pi_d).
struct HeldoutLogs {
  Vector log_px;   // NaN where the model has no p(X)
  Vector log_pxy;  // NaN where the model has no p(X)
  Vector log_py_given_x;
  bool has_px = true;
  std::size_t steps = 0;  // number of labeled data points / time steps covered
};

HeldoutLogs heldout_log_terms(const Model& model, const Dataset& data);
HeldoutLogs heldout_log_terms(const Model& model, const SequenceDataset& data);

struct MetricsReport {
  std::string model_id;
  ModelKind kind = ModelKind::pf_gmm;
  std::uint64_t seed = 0;
  double p = 1.0;
  int K = 0;
  double auroc = 0.5;
  std::optional<double> heldout_log_px;  // per-datum mean; absent for logreg
  double heldout_log_py_given_x = 0.0;   // per-datum mean
  std::optional<double> switch_auroc;
};

/// `mask` (ground-truth relevance) is optional; when given and the model has
/// switches, switch_auroc is filled in.
MetricsReport heldout_metrics(const Model& model, const Dataset& test, std::span<const int> mask = {});
MetricsReport heldout_metrics(const Model& model, const SequenceDataset& test, std::span<const int> mask = {});

struct LandscapePoint {
  std::string model_id;
  ModelKind kind = ModelKind::pf_gmm;
  std::uint64_t seed = 0;
  double p = 1.0;
  int K = 0;
  std::optional<double> log_px;
  double log_py_given_x = 0.0;
};

struct NamedModel {
  std::string id;
  Model model;
};

std::vector<LandscapePoint> landscape(std::span<const NamedModel> models, const Dataset& test);
std::vector<LandscapePoint> landscape(std::span<const NamedModel> models, const SequenceDataset& test);

std::vector<double> default_p_grid();

/// Validation-based choice of p: fit on `1 - val_fraction` of `train` for
/// every grid value, score AUROC on the rest, keep the best (first on ties).
/// The returned model is the one fit on the fitting part; `fits` keeps the
/// model for every grid value.
struct PTuning {
  double p = 1.0;
  std::size_t best_index = 0;
  std::vector<double> grid;
  std::vector<double> val_auroc;
  std::vector<Model> fits;
  Model model;
};

PTuning tune_p(ModelKind kind, const Dataset& train, std::span<const double> grid, const FitOptions& opt,
               double val_fraction = 0.2, std::uint64_t split_seed = 0);
PTuning tune_p(ModelKind kind, const SequenceDataset& train, std::span<const double> grid, const FitOptions& opt,
               double val_fraction = 0.2, std::uint64_t split_seed = 0);

}  // namespace pfmix
