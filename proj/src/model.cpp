#include "pfmix/model.hpp"

#include <array>
#include <utility>

namespace pfmix {

namespace {

constexpr std::array<std::pair<ModelKind, std::string_view>, 7> kNames{{
    {ModelKind::pf_gmm, "pf-gmm"},
    {ModelKind::sup_gmm, "sup-gmm"},
    {ModelKind::two_step_gmm, "2step-gmm"},
    {ModelKind::pf_hmm, "pf-hmm"},
    {ModelKind::sup_hmm, "sup-hmm"},
    {ModelKind::two_step_hmm, "2step-hmm"},
    {ModelKind::logreg, "logreg"},
}};

template <class R>
void copy_fit_meta(Model& m, const R& r) {
  m.seed = r.seed;
  m.elbo_trace = r.elbo_trace;
  m.converged = r.converged;
  m.iterations = r.iterations;
}

template <class... F>
struct overloaded : F... {
  using F::operator()...;
};

}  // namespace

std::string_view to_string(ModelKind kind) {
  for (const auto& [k, name] : kNames)
    if (k == kind) return name;
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  for (const auto& [k, n] : kNames)
    if (n == name) return k;
  throw UsageError("unknown model kind '" + std::string(name) +
                   "' (expected pf-gmm, pf-hmm, sup-gmm, sup-hmm, 2step-gmm, 2step-hmm or logreg)");
}

bool is_sequence_kind(ModelKind kind) {
  return kind == ModelKind::pf_hmm || kind == ModelKind::sup_hmm || kind == ModelKind::two_step_hmm;
}

bool uses_switch_prior(ModelKind kind) { return kind == ModelKind::pf_gmm || kind == ModelKind::pf_hmm; }

std::size_t Model::dims() const {
  return std::visit(overloaded{[](const MixtureModel& m) { return m.params.D(); },
                               [](const HmmModel& m) { return m.params.D(); },
                               [](const TwoStepGmmModel& m) { return m.params.D(); },
                               [](const TwoStepHmmModel& m) { return m.params.D(); },
                               [](const LogRegModel& m) { return m.dims(); }},
                    body);
}

std::size_t Model::classes() const {
  return std::visit(overloaded{[](const MixtureModel& m) { return m.params.C(); },
                               [](const HmmModel& m) { return m.params.C(); },
                               [](const TwoStepGmmModel& m) { return m.classifier.classes(); },
                               [](const TwoStepHmmModel& m) { return m.classifier.classes(); },
                               [](const LogRegModel& m) { return m.classes(); }},
                    body);
}

const SwitchPosterior* Model::switches() const {
  return std::visit(overloaded{[](const MixtureModel& m) { return &m.phi; }, [](const HmmModel& m) { return &m.phi; },
                               [](const TwoStepGmmModel& m) { return &m.phi; },
                               [](const TwoStepHmmModel& m) { return &m.phi; },
                               [](const LogRegModel&) -> const SwitchPosterior* { return nullptr; }},
                    body);
}

Model fit_model(ModelKind kind, const Dataset& data, const FitOptions& opt) {
  if (is_sequence_kind(kind)) throw UsageError(std::string(to_string(kind)) + " needs sequence data");
  if (!data.labeled()) throw UsageError("fitting needs labeled data");
  Model m;
  m.kind = kind;
  m.K = opt.em.K;
  m.p = 1.0;
  switch (kind) {
    case ModelKind::pf_gmm: {
      auto r = fit(data, opt.em);
      m.p = opt.em.p;
      copy_fit_meta(m, r);
      m.body = MixtureModel{std::move(r.params), std::move(r.phi)};
      break;
    }
    case ModelKind::sup_gmm: {
      auto r = fit_sup_gmm(data, opt.em);
      copy_fit_meta(m, r);
      m.body = MixtureModel{std::move(r.params), std::move(r.phi)};
      break;
    }
    case ModelKind::two_step_gmm: {
      auto r = fit_2step(data, opt.em, opt.logreg);
      copy_fit_meta(m, r.generative);
      m.body = TwoStepGmmModel{std::move(r.generative.params), std::move(r.generative.phi), std::move(r.classifier)};
      break;
    }
    case ModelKind::logreg:
      m.K = 0;
      m.seed = opt.em.seed;
      m.body = fit_logreg(data.X, data.y, data.n_classes, opt.logreg);
      m.converged = true;
      break;
    default:
      break;
  }
  return m;
}

Model fit_model(ModelKind kind, const SequenceDataset& data, const FitOptions& opt) {
  if (!is_sequence_kind(kind)) return fit_model(kind, data.flatten(), opt);
  if (!data.labeled()) throw UsageError("fitting needs labeled data");
  Model m;
  m.kind = kind;
  m.K = opt.em.K;
  m.p = 1.0;
  switch (kind) {
    case ModelKind::pf_hmm: {
      auto r = hmm_fit(data, opt.em);
      m.p = opt.em.p;
      copy_fit_meta(m, r);
      m.body = HmmModel{std::move(r.params), std::move(r.phi)};
      break;
    }
    case ModelKind::sup_hmm: {
      auto r = fit_sup_hmm(data, opt.em);
      copy_fit_meta(m, r);
      m.body = HmmModel{std::move(r.params), std::move(r.phi)};
      break;
    }
    case ModelKind::two_step_hmm: {
      auto r = fit_2step_hmm(data, opt.em, opt.logreg);
      copy_fit_meta(m, r.generative);
      m.body = TwoStepHmmModel{std::move(r.generative.params), std::move(r.generative.phi), std::move(r.classifier)};
      break;
    }
    default:
      break;
  }
  return m;
}

Matrix predict_proba(const Model& model, const Dataset& data) {
  if (data.dims() != model.dims()) throw DataError("model expects " + std::to_string(model.dims()) +
                                                   " input columns, data has " + std::to_string(data.dims()));
  return std::visit(
      overloaded{[&](const MixtureModel& m) { return predict_proba(m.params, m.phi, data.X); },
                 [&](const TwoStepGmmModel& m) { return m.classifier.predict_proba(posterior_z(m.params, m.phi, data.X)); },
                 [&](const LogRegModel& m) { return m.predict_proba(data.X); },
                 [&](const auto&) -> Matrix { throw UsageError("sequence model needs sequence data"); }},
      model.body);
}

Matrix predict_proba(const Model& model, const SequenceDataset& data) {
  if (!is_sequence_kind(model.kind)) return predict_proba(model, data.flatten());
  if (data.dims() != model.dims()) throw DataError("model expects " + std::to_string(model.dims()) +
                                                   " input columns, data has " + std::to_string(data.dims()));
  const auto one = [&](const HmmParams& params, const SwitchPosterior& phi) {
    Matrix Q(static_cast<Eigen::Index>(data.total_steps()), static_cast<Eigen::Index>(params.K()));
    for (std::size_t n = 0; n < data.num_sequences(); ++n)
      Q.middleRows(static_cast<Eigen::Index>(data.offsets[n]), static_cast<Eigen::Index>(data.length(n))) =
          hmm_posterior_z(params, phi, data.rows(n));
    return Q;
  };
  return std::visit(overloaded{[&](const HmmModel& m) -> Matrix {
                                 Matrix out = one(m.params, m.phi) * m.params.gmm.eta;
                                 for (Eigen::Index t = 0; t < out.rows(); ++t) out.row(t) /= out.row(t).sum();
                                 return out;
                               },
                               [&](const TwoStepHmmModel& m) -> Matrix {
                                 return m.classifier.predict_proba(one(m.params, m.phi));
                               },
                               [&](const auto&) -> Matrix { throw UsageError("unexpected model body"); }},
                    model.body);
}

}  // namespace pfmix
