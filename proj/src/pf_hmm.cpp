#include "pfmix/pf_hmm.hpp"

#include <cmath>
#include <exception>
#include <limits>

#include "pfmix/kernels.hpp"
#include "pfmix/pf_gmm.hpp"

namespace pfmix {

namespace {


std::uint64_t stream_id(std::uint64_t restart, std::uint64_t purpose) { return (restart << 8) | purpose; }

Matrix log_matrix(const Matrix& A) { return A.array().log().matrix(); }

Vector log_theta(const GmmParams& g) {
  Vector v(static_cast<Eigen::Index>(g.K()));
  for (Eigen::Index k = 0; k < v.size(); ++k) v(k) = std::log(g.theta[static_cast<std::size_t>(k)]);
  return v;
}

void add_target(Matrix& target, const GmmParams& g, std::span<const int> y, Eigen::Index row0, Eigen::Index T) {
  for (Eigen::Index t = 0; t < T; ++t) {
    const int c = y[static_cast<std::size_t>(row0 + t)];
    if (c < 0 || static_cast<std::size_t>(c) >= g.C()) throw DataError("label out of range for the model");
    for (Eigen::Index k = 0; k < target.cols(); ++k) target(t, k) = floored_log(g.eta(k, c));
  }
}

double step_score(const ChainScores& s, Eigen::Index t, Eigen::Index k) {
  return s.target.size() ? s.emission(t, k) + s.target(t, k) : s.emission(t, k);
}

// alpha_1 = emission + ln theta [+ target], in that order.
double first_score(const ChainScores& s, const Vector& lt, Eigen::Index k) {
  double v = s.emission(0, k) + lt(k);
  if (s.target.size()) v += s.target(0, k);
  return v;
}

Matrix forward_pass(const HmmParams& params, const ChainScores& s, const Matrix& la, const Vector& lt) {
  const Eigen::Index T = s.emission.rows(), K = s.emission.cols();
  Matrix alpha(T, K);
  std::vector<double> buf(static_cast<std::size_t>(K));
  for (Eigen::Index k = 0; k < K; ++k) alpha(0, k) = first_score(s, lt, k);
  for (Eigen::Index t = 1; t < T; ++t)
    for (Eigen::Index k = 0; k < K; ++k) {
      for (Eigen::Index j = 0; j < K; ++j) buf[static_cast<std::size_t>(j)] = alpha(t - 1, j) + la(j, k);
      alpha(t, k) = step_score(s, t, k) + log_sum_exp(std::span<const double>(buf));
    }
  (void)params;
  return alpha;
}

Matrix backward_pass(const ChainScores& s, const Matrix& la) {
  const Eigen::Index T = s.emission.rows(), K = s.emission.cols();
  Matrix beta = Matrix::Zero(T, K);
  std::vector<double> buf(static_cast<std::size_t>(K));
  for (Eigen::Index t = T - 2; t >= 0; --t)
    for (Eigen::Index j = 0; j < K; ++j) {
      for (Eigen::Index k = 0; k < K; ++k)
        buf[static_cast<std::size_t>(k)] = la(j, k) + step_score(s, t + 1, k) + beta(t + 1, k);
      beta(t, j) = log_sum_exp(std::span<const double>(buf));
    }
  return beta;
}

void check_scores(const ChainScores& s) {
  if (s.emission.rows() == 0) throw DataError("empty sequence");
  if (!s.emission.allFinite()) throw DataError("non-finite emission scores (NaN or infinite input?)");
}

}  // namespace

void HmmParams::validate() const {
  gmm.validate();
  if (static_cast<std::size_t>(A.rows()) != gmm.K() || A.rows() != A.cols())
    throw DomainError("HmmParams: transition matrix must be K x K");
  for (Eigen::Index j = 0; j < A.rows(); ++j)
    if (!Simplex::is_valid(A.row(j).transpose(), 1e-10)) throw DomainError("HmmParams: transition row is not a simplex");
}

ChainScores chain_scores(const HmmParams& params, const SwitchPosterior& phi, const Matrix& X, std::span<const int> y,
                         bool use_y) {
  if (static_cast<std::size_t>(X.cols()) != params.D()) throw DataError("input dimension does not match the model");
  if (!X.allFinite()) throw DataError("input contains NaN or infinite values");
  ChainScores s;
  kernels::serial::expected_log_emission(X, params.gmm, phi.values(), s.emission);
  if (use_y) {
    if (y.size() != static_cast<std::size_t>(X.rows())) throw DataError("label count does not match sequence length");
    s.target.resize(X.rows(), static_cast<Eigen::Index>(params.K()));
    add_target(s.target, params.gmm, y, 0, X.rows());
  }
  return s;
}

StatePosteriors forward_backward(const HmmParams& params, const ChainScores& scores, bool with_edges) {
  check_scores(scores);
  const Matrix la = log_matrix(params.A);
  const Vector lt = log_theta(params.gmm);
  const Matrix alpha = forward_pass(params, scores, la, lt);
  const Matrix beta = backward_pass(scores, la);
  const Eigen::Index T = alpha.rows(), K = alpha.cols();

  StatePosteriors out;
  out.loglik = log_sum_exp(alpha.row(T - 1));
  if (!std::isfinite(out.loglik)) throw NumericError("sequence log-likelihood is not finite");
  // Each step is normalized by its own log-sum rather than the chain total, so
  // rounding in long chains does not pull the rows off the simplex.
  out.gamma.resize(T, K);
  Vector row(K);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index k = 0; k < K; ++k) row(k) = alpha(t, k) + beta(t, k);
    const double z = log_sum_exp(row);
    for (Eigen::Index k = 0; k < K; ++k) out.gamma(t, k) = std::exp(row(k) - z);
  }
  if (with_edges) {
    out.edge.assign(static_cast<std::size_t>(T > 0 ? T - 1 : 0), Matrix(K, K));
    Matrix slice(K, K);
    for (Eigen::Index t = 0; t + 1 < T; ++t) {
      for (Eigen::Index j = 0; j < K; ++j)
        for (Eigen::Index k = 0; k < K; ++k)
          slice(j, k) = alpha(t, j) + la(j, k) + step_score(scores, t + 1, k) + beta(t + 1, k);
      const double z = log_sum_exp(slice.reshaped());
      out.edge[static_cast<std::size_t>(t)] = (slice.array() - z).exp().matrix();
    }
  }
  return out;
}

StatePosteriors forward_backward(const HmmParams& params, const SwitchPosterior& phi, const Matrix& X,
                                 std::span<const int> y, bool use_y) {
  return forward_backward(params, chain_scores(params, phi, X, y, use_y));
}

double forward_loglik(const HmmParams& params, const ChainScores& scores) {
  check_scores(scores);
  const Matrix alpha = forward_pass(params, scores, log_matrix(params.A), log_theta(params.gmm));
  return log_sum_exp(alpha.row(alpha.rows() - 1));
}

double backward_loglik(const HmmParams& params, const ChainScores& scores) {
  check_scores(scores);
  const Matrix beta = backward_pass(scores, log_matrix(params.A));
  const Vector lt = log_theta(params.gmm);
  Vector first(beta.cols());
  for (Eigen::Index k = 0; k < beta.cols(); ++k) first(k) = first_score(scores, lt, k) + beta(0, k);
  return log_sum_exp(first);
}

namespace {

// Emission scores for every step at once (row-wise kernel), then sliced per sequence.
std::vector<ChainScores> all_chain_scores(const HmmParams& params, const SwitchPosterior& phi,
                                          const SequenceDataset& data, bool use_y, Backend backend) {
  if (data.dims() != params.D()) throw DataError("input dimension does not match the model");
  if (!data.X.allFinite()) throw DataError("input contains NaN or infinite values");
  if (use_y && !data.labeled()) throw UsageError("labels required");
  Matrix E;
  kernels::expected_log_emission(data.X, params.gmm, phi.values(), E, backend);
  const std::size_t N = data.num_sequences();
  std::vector<ChainScores> out(N);
  for (std::size_t n = 0; n < N; ++n) {
    const auto row0 = static_cast<Eigen::Index>(data.offsets[n]);
    const auto T = static_cast<Eigen::Index>(data.length(n));
    out[n].emission = E.middleRows(row0, T);
    if (use_y) {
      out[n].target.resize(T, static_cast<Eigen::Index>(params.K()));
      add_target(out[n].target, params.gmm, data.y, row0, T);
    }
  }
  return out;
}

template <class F>
void for_each_sequence(std::size_t N, Backend backend, F&& f) {
  if (backend == Backend::serial) {
    for (std::size_t n = 0; n < N; ++n) f(n);
    return;
  }
  std::exception_ptr err;
  const auto count = static_cast<std::int64_t>(N);
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t n = 0; n < count; ++n) {
    try {
      f(static_cast<std::size_t>(n));
    } catch (...) {
#pragma omp critical(pfmix_hmm_error)
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
}

}  // namespace

std::vector<StatePosteriors> hmm_e_step(const HmmParams& params, const SwitchPosterior& phi,
                                        const SequenceDataset& data, bool use_y, Backend backend) {
  const auto scores = all_chain_scores(params, phi, data, use_y, backend);
  std::vector<StatePosteriors> post(scores.size());
  for_each_sequence(scores.size(), backend, [&](std::size_t n) { post[n] = forward_backward(params, scores[n]); });
  return post;
}

Responsibilities stack_gamma(const std::vector<StatePosteriors>& post, const SequenceDataset& data) {
  Responsibilities r;
  const auto K = post.empty() ? Eigen::Index{0} : post.front().gamma.cols();
  r.r.resize(static_cast<Eigen::Index>(data.total_steps()), K);
  for (std::size_t n = 0; n < post.size(); ++n)
    r.r.middleRows(static_cast<Eigen::Index>(data.offsets[n]), post[n].gamma.rows()) = post[n].gamma;
  return r;
}

HmmParams hmm_m_step(const std::vector<StatePosteriors>& post, const SwitchPosterior& phi,
                     const SequenceDataset& data, const EmConfig& cfg, const HmmParams& previous, Rng& rng,
                     std::size_t* rescued) {
  const std::size_t N = data.num_sequences();
  if (post.size() != N) throw UsageError("hmm_m_step: one posterior per sequence required");
  const auto K = static_cast<Eigen::Index>(previous.K());
  const auto resp = stack_gamma(post, data);

  Matrix first(static_cast<Eigen::Index>(N), K);
  for (std::size_t n = 0; n < N; ++n) first.row(static_cast<Eigen::Index>(n)) = post[n].gamma.row(0);
  const Vector first_mass = first.colwise().sum().transpose();

  const std::span<const int> y = cfg.use_labels ? std::span<const int>(data.y) : std::span<const int>{};
  HmmParams next;
  next.gmm = m_step_pooled(resp, phi, data.X, y, first_mass, N, cfg, previous.gmm, rng, rescued);

  Matrix counts = Matrix::Zero(K, K);
  for (const auto& p : post)
    for (const auto& e : p.edge) counts += e;
  next.A = previous.A;
  for (Eigen::Index j = 0; j < K; ++j) {
    const double total = counts.row(j).sum();
    if (total > 0.0) next.A.row(j) = counts.row(j) / total;
  }
  return next;
}

double hmm_elbo(const HmmParams& params, const SwitchPosterior& phi, const SequenceDataset& data, double p,
                bool use_y, Backend backend) {
  const auto scores = all_chain_scores(params, phi, data, use_y, backend);
  std::vector<double> ll(scores.size());
  for_each_sequence(scores.size(), backend, [&](std::size_t n) { ll[n] = forward_loglik(params, scores[n]); });
  double total = 0.0;
  for (double v : ll) total += v;
  return total + static_cast<double>(data.total_steps()) * switch_kl_term(phi, p);
}

HmmParams init_hmm_params(const SequenceDataset& data, const EmConfig& cfg, std::uint64_t stream) {
  HmmParams params;
  params.gmm = init_params(data.flatten(), cfg, stream);
  const auto K = static_cast<Eigen::Index>(cfg.K);
  params.A = Matrix::Constant(K, K, 1.0 / static_cast<double>(K));
  return params;
}

HmmFitResult hmm_fit(const SequenceDataset& data, const EmConfig& cfg) {
  cfg.validate();
  data.validate();
  if (cfg.use_labels && !data.labeled()) throw UsageError("hmm_fit: labeled data required");
  if (data.total_steps() < static_cast<std::size_t>(cfg.K)) throw UsageError("hmm_fit: fewer time steps than states");
  const double p = cfg.effective_p();

  HmmFitResult best;
  bool have = false;
  for (int r = 0; r < cfg.n_restarts; ++r) {
    const auto restart = static_cast<std::uint64_t>(r);
    Rng rescue_rng(cfg.seed, stream_id(restart, 1));
    HmmParams params = init_hmm_params(data, cfg, restart);
    SwitchPosterior phi = SwitchPosterior::constant(data.dims(), p);
    std::vector<double> trace;
    std::size_t rescues = 0;
    bool converged = false;
    for (int it = 0; it < cfg.max_iters; ++it) {
      const auto post = hmm_e_step(params, phi, data, cfg.use_labels, cfg.backend);
      phi = update_phi(params.gmm, stack_gamma(post, data), data.X, p, cfg.backend);
      params = hmm_m_step(post, phi, data, cfg, params, rescue_rng, &rescues);
      const double value = hmm_elbo(params, phi, data, p, cfg.use_labels, cfg.backend) +
                           dirichlet_log_prior(params.gmm.theta, cfg.alpha);
      if (!std::isfinite(value) || !params.all_finite()) throw NumericError("EM produced a non-finite objective");
      trace.push_back(value);
      if (trace.size() >= 2) {
        const double prev = trace[trace.size() - 2];
        if (std::abs(value - prev) <= cfg.rel_tol * std::abs(prev)) {
          converged = true;
          break;
        }
      }
    }
    if (!have || trace.back() > best.elbo_trace.back()) {
      best.params = std::move(params);
      best.phi = std::move(phi);
      best.elbo_trace = std::move(trace);
      best.converged = converged;
      best.iterations = static_cast<int>(best.elbo_trace.size());
      best.best_restart = r;
      best.rescues = rescues;
      have = true;
    }
  }
  best.seed = cfg.seed;
  return best;
}

Matrix hmm_posterior_z(const HmmParams& params, const SwitchPosterior& phi, const Matrix& X) {
  return forward_backward(params, chain_scores(params, phi, X, {}, false), false).gamma;
}

Matrix hmm_predict_proba(const HmmParams& params, const SwitchPosterior& phi, const Matrix& X) {
  Matrix out = hmm_posterior_z(params, phi, X) * params.gmm.eta;
  for (Eigen::Index t = 0; t < out.rows(); ++t) out.row(t) /= out.row(t).sum();
  return out;
}

}  // namespace pfmix
