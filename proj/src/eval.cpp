#include "pfmix/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pfmix/kernels.hpp"

namespace pfmix {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

template <class... F>
struct overloaded : F... {
  using F::operator()...;
};

// log p(x_n) and log p(x_n, y_n) for a mixture with per-datum switches.
void mixture_logs(const GmmParams& params, const SwitchPosterior& phi, const Matrix& X, std::span<const int> y,
                  HeldoutLogs& out) {
  Matrix E;
  kernels::blended_log_emission(X, params, phi.values(), E, Backend::parallel);
  const Eigen::Index N = X.rows(), K = E.cols();
  out.log_px.resize(N);
  out.log_pxy.resize(N);
  out.log_py_given_x.resize(N);
  for (Eigen::Index n = 0; n < N; ++n) {
    Vector a(K), b(K);
    for (Eigen::Index k = 0; k < K; ++k) {
      a(k) = E(n, k) + std::log(params.theta[static_cast<std::size_t>(k)]);
      b(k) = a(k) + floored_log(params.eta(k, y[static_cast<std::size_t>(n)]));
    }
    out.log_px(n) = log_sum_exp(a);
    out.log_pxy(n) = log_sum_exp(b);
    out.log_py_given_x(n) = out.log_pxy(n) - out.log_px(n);
  }
}

ChainScores blended_chain(const HmmParams& params, const SwitchPosterior& phi, const Matrix& X,
                          std::span<const int> y) {
  ChainScores s;
  kernels::serial::blended_log_emission(X, params.gmm, phi.values(), s.emission);
  if (!y.empty()) {
    s.target.resize(X.rows(), static_cast<Eigen::Index>(params.K()));
    for (Eigen::Index t = 0; t < X.rows(); ++t)
      for (Eigen::Index k = 0; k < s.target.cols(); ++k)
        s.target(t, k) = floored_log(params.gmm.eta(k, y[static_cast<std::size_t>(t)]));
  }
  return s;
}

// Per-sequence log p(X) under an HMM, with per-step switches.
double hmm_log_px(const HmmParams& params, const SwitchPosterior& phi, const Matrix& X) {
  return forward_loglik(params, blended_chain(params, phi, X, {}));
}

void check_labels(std::span<const int> y, std::size_t classes, std::size_t rows) {
  if (y.size() != rows) throw DataError("evaluation needs one label per row");
  for (int v : y)
    if (v < 0 || static_cast<std::size_t>(v) >= classes)
      throw DataError("label " + std::to_string(v) + " is out of range for a " + std::to_string(classes) +
                      "-class model");
}

double mean_of(const Vector& v, std::size_t steps) { return v.sum() / static_cast<double>(steps); }

template <class Data>
MetricsReport report_from(const Model& model, const Data& test, std::span<const int> mask) {
  const auto logs = heldout_log_terms(model, test);
  MetricsReport r;
  r.model_id = std::string(to_string(model.kind));
  r.kind = model.kind;
  r.seed = model.seed;
  r.p = model.p;
  r.K = model.K;
  r.auroc = multiclass_auroc(predict_proba(model, test), test.y);
  if (logs.has_px) r.heldout_log_px = mean_of(logs.log_px, logs.steps);
  r.heldout_log_py_given_x = mean_of(logs.log_py_given_x, logs.steps);
  if (!mask.empty())
    if (const auto* phi = model.switches()) r.switch_auroc = switch_recovery(*phi, mask);
  return r;
}

template <class Data>
std::vector<LandscapePoint> landscape_impl(std::span<const NamedModel> models, const Data& test) {
  std::vector<LandscapePoint> rows;
  rows.reserve(models.size());
  for (const auto& nm : models) {
    const auto logs = heldout_log_terms(nm.model, test);
    LandscapePoint pt;
    pt.model_id = nm.id;
    pt.kind = nm.model.kind;
    pt.seed = nm.model.seed;
    pt.p = nm.model.p;
    pt.K = nm.model.K;
    if (logs.has_px) pt.log_px = mean_of(logs.log_px, logs.steps);
    pt.log_py_given_x = mean_of(logs.log_py_given_x, logs.steps);
    rows.push_back(std::move(pt));
  }
  return rows;
}

template <class Data>
PTuning tune_impl(ModelKind kind, const Data& train, std::span<const double> grid, const FitOptions& opt,
                  double val_fraction, std::uint64_t split_seed) {
  if (grid.empty()) throw UsageError("p grid is empty");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw UsageError("validation fraction must be in (0, 1)");
  const auto [fit_part, val_part] = split(train, 1.0 - val_fraction, split_seed);
  PTuning t;
  t.grid.assign(grid.begin(), grid.end());
  double best = -1.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    FitOptions o = opt;
    o.em.p = grid[i];
    Model m = fit_model(kind, fit_part, o);
    const double score = multiclass_auroc(predict_proba(m, val_part), val_part.y);
    t.val_auroc.push_back(score);
    if (score > best) {
      best = score;
      t.best_index = i;
      t.p = grid[i];
    }
    t.fits.push_back(std::move(m));
  }
  t.model = t.fits[t.best_index];
  return t;
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw UsageError("auroc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw DataError("auroc: labels must be 0 or 1");
    if (std::isnan(scores[i])) throw DataError("auroc: NaN score");
    n_pos += static_cast<std::size_t>(labels[i]);
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DomainError("auroc is undefined when only one class is present");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Twice the rank sum of positives keeps midranks integral.
  std::uint64_t twice_rank_sum = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const std::uint64_t twice_midrank = (i + 1) + (j + 1);
    for (std::size_t m = i; m <= j; ++m)
      if (labels[order[m]] == 1) twice_rank_sum += twice_midrank;
    i = j + 1;
  }
  // 2U = 2R - n_pos (n_pos + 1); U counts positive-above-negative pairs, ties as 1/2.
  const std::uint64_t twice_u = twice_rank_sum - n_pos * (n_pos + 1);
  return static_cast<double>(twice_u) / 2.0 / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double multiclass_auroc(const Matrix& proba, std::span<const int> labels) {
  if (static_cast<std::size_t>(proba.rows()) != labels.size()) throw UsageError("auroc: row count mismatch");
  const Eigen::Index C = proba.cols();
  if (C == 2) {
    const Vector s = proba.col(1);
    return auroc(std::span<const double>(s.data(), static_cast<std::size_t>(s.size())), labels);
  }
  double total = 0.0;
  int used = 0;
  std::vector<int> bin(labels.size());
  for (Eigen::Index c = 0; c < C; ++c) {
    std::size_t pos = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      bin[i] = labels[i] == c ? 1 : 0;
      pos += static_cast<std::size_t>(bin[i]);
    }
    if (pos == 0 || pos == labels.size()) continue;
    const Vector s = proba.col(c);
    total += auroc(std::span<const double>(s.data(), static_cast<std::size_t>(s.size())), bin);
    ++used;
  }
  if (used == 0) throw DomainError("auroc is undefined when only one class is present");
  return total / used;
}

double switch_recovery(const SwitchPosterior& phi, std::span<const int> mask) {
  if (mask.size() != phi.size()) throw UsageError("switch_recovery: mask length differs from phi");
  const Vector& v = phi.values();
  return auroc(std::span<const double>(v.data(), phi.size()), mask);
}

HeldoutLogs heldout_log_terms(const Model& model, const Dataset& data) {
  if (is_sequence_kind(model.kind)) throw UsageError("sequence model needs sequence data");
  if (data.dims() != model.dims()) throw DataError("model/data dimension mismatch");
  check_labels(data.y, model.classes(), data.size());
  HeldoutLogs out;
  out.steps = data.size();
  std::visit(overloaded{[&](const MixtureModel& m) { mixture_logs(m.params, m.phi, data.X, data.y, out); },
                        [&](const TwoStepGmmModel& m) {
                          HeldoutLogs g;
                          mixture_logs(m.params, m.phi, data.X, std::vector<int>(data.size(), 0), g);
                          const Matrix pr = m.classifier.predict_proba(posterior_z(m.params, m.phi, data.X));
                          out.log_px = g.log_px;
                          out.log_py_given_x.resize(pr.rows());
                          for (Eigen::Index n = 0; n < pr.rows(); ++n)
                            out.log_py_given_x(n) = floored_log(pr(n, data.y[static_cast<std::size_t>(n)]));
                          out.log_pxy = out.log_px + out.log_py_given_x;
                        },
                        [&](const LogRegModel& m) {
                          const Matrix pr = m.predict_proba(data.X);
                          out.has_px = false;
                          out.log_px = Vector::Constant(pr.rows(), kNaN);
                          out.log_pxy = out.log_px;
                          out.log_py_given_x.resize(pr.rows());
                          for (Eigen::Index n = 0; n < pr.rows(); ++n)
                            out.log_py_given_x(n) = floored_log(pr(n, data.y[static_cast<std::size_t>(n)]));
                        },
                        [&](const auto&) { throw UsageError("unexpected model body"); }},
             model.body);
  return out;
}

HeldoutLogs heldout_log_terms(const Model& model, const SequenceDataset& data) {
  if (!is_sequence_kind(model.kind)) return heldout_log_terms(model, data.flatten());
  if (data.dims() != model.dims()) throw DataError("model/data dimension mismatch");
  check_labels(data.y, model.classes(), data.total_steps());
  const auto N = static_cast<Eigen::Index>(data.num_sequences());
  HeldoutLogs out;
  out.steps = data.total_steps();
  out.log_px.resize(N);
  out.log_pxy.resize(N);
  out.log_py_given_x.resize(N);
  std::visit(overloaded{[&](const HmmModel& m) {
                          for (Eigen::Index n = 0; n < N; ++n) {
                            const auto s = static_cast<std::size_t>(n);
                            const Matrix X = data.rows(s);
                            out.log_px(n) = hmm_log_px(m.params, m.phi, X);
                            out.log_pxy(n) = forward_loglik(m.params, blended_chain(m.params, m.phi, X, data.labels(s)));
                            out.log_py_given_x(n) = out.log_pxy(n) - out.log_px(n);
                          }
                        },
                        [&](const TwoStepHmmModel& m) {
                          for (Eigen::Index n = 0; n < N; ++n) {
                            const auto s = static_cast<std::size_t>(n);
                            const Matrix X = data.rows(s);
                            out.log_px(n) = hmm_log_px(m.params, m.phi, X);
                            const Matrix pr = m.classifier.predict_proba(hmm_posterior_z(m.params, m.phi, X));
                            const auto y = data.labels(s);
                            double acc = 0.0;
                            for (Eigen::Index t = 0; t < pr.rows(); ++t)
                              acc += floored_log(pr(t, y[static_cast<std::size_t>(t)]));
                            out.log_py_given_x(n) = acc;
                            out.log_pxy(n) = out.log_px(n) + acc;
                          }
                        },
                        [&](const auto&) { throw UsageError("unexpected model body"); }},
             model.body);
  return out;
}

MetricsReport heldout_metrics(const Model& model, const Dataset& test, std::span<const int> mask) {
  return report_from(model, test, mask);
}

MetricsReport heldout_metrics(const Model& model, const SequenceDataset& test, std::span<const int> mask) {
  return report_from(model, test, mask);
}

std::vector<LandscapePoint> landscape(std::span<const NamedModel> models, const Dataset& test) {
  if (models.empty()) throw UsageError("landscape needs at least one model");
  return landscape_impl(models, test);
}

std::vector<LandscapePoint> landscape(std::span<const NamedModel> models, const SequenceDataset& test) {
  if (models.empty()) throw UsageError("landscape needs at least one model");
  return landscape_impl(models, test);
}

std::vector<double> default_p_grid() { return {0.01, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9, 0.99}; }

PTuning tune_p(ModelKind kind, const Dataset& train, std::span<const double> grid, const FitOptions& opt,
               double val_fraction, std::uint64_t split_seed) {
  return tune_impl(kind, train, grid, opt, val_fraction, split_seed);
}

PTuning tune_p(ModelKind kind, const SequenceDataset& train, std::span<const double> grid, const FitOptions& opt,
               double val_fraction, std::uint64_t split_seed) {
  return tune_impl(kind, train, grid, opt, val_fraction, split_seed);
}

}  // namespace pfmix
