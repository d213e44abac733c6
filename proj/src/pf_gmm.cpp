#include "pfmix/pf_gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pfmix/kernels.hpp"

namespace pfmix {

namespace {

constexpr double kEmptyComponentMass = 1e-8;
constexpr double kEtaInitNoise = 0.01;
constexpr std::uint64_t kInitPurpose = 0;
constexpr std::uint64_t kRescuePurpose = 1;

std::uint64_t stream_id(std::uint64_t restart, std::uint64_t purpose) { return (restart << 8) | purpose; }

void check_shapes(const GmmParams& params, const Matrix& X, std::span<const int> y) {
  if (static_cast<std::size_t>(X.cols()) != params.D()) throw DataError("input dimension does not match the model");
  if (!y.empty()) {
    if (y.size() != static_cast<std::size_t>(X.rows())) throw DataError("label count does not match row count");
    for (int v : y)
      if (v < 0 || static_cast<std::size_t>(v) >= params.C()) throw DataError("label out of range for the model");
  }
}

void check_finite_input(const Matrix& X) {
  if (!X.allFinite()) throw DataError("input contains NaN or infinite values");
}

// ln theta_k + [y] ln eta_{k, y_n} added to emission scores in place.
void add_prior_and_target(Matrix& scores, const GmmParams& params, std::span<const int> y) {
  const Eigen::Index K = scores.cols();
  Vector log_theta(K);
  for (Eigen::Index k = 0; k < K; ++k) log_theta(k) = std::log(params.theta[static_cast<std::size_t>(k)]);
  for (Eigen::Index n = 0; n < scores.rows(); ++n)
    for (Eigen::Index k = 0; k < K; ++k) {
      scores(n, k) += log_theta(k);
      if (!y.empty()) scores(n, k) += floored_log(params.eta(k, y[static_cast<std::size_t>(n)]));
    }
}

Matrix floored_row_normalize(const Matrix& counts) {
  Matrix eta(counts.rows(), counts.cols());
  for (Eigen::Index k = 0; k < counts.rows(); ++k) {
    const double total = counts.row(k).sum();
    if (total > 0.0) {
      eta.row(k) = counts.row(k) / total;
    } else {
      eta.row(k).setConstant(1.0 / static_cast<double>(counts.cols()));
    }
    eta.row(k) = eta.row(k).cwiseMax(kProbFloor);
    eta.row(k) /= eta.row(k).sum();
  }
  return eta;
}

}  // namespace

// ---- parameter types ------------------------------------------------------

void GmmParams::validate() const {
  const auto K = b_mean.rows(), D = b_mean.cols();
  if (K == 0 || D == 0) throw DomainError("GmmParams: empty parameter set");
  if (static_cast<Eigen::Index>(theta.size()) != K || b_var.rows() != K || b_var.cols() != D ||
      pi_mean.size() != D || pi_var.size() != D || eta.rows() != K || eta.cols() == 0)
    throw DomainError("GmmParams: inconsistent shapes");
  if (!Simplex::is_valid(theta.weights(), 1e-10)) throw DomainError("GmmParams: theta is not a simplex");
  for (Eigen::Index k = 0; k < K; ++k)
    if (!Simplex::is_valid(eta.row(k).transpose(), 1e-10)) throw DomainError("GmmParams: eta row is not a simplex");
  if ((b_var.array() < kVarFloor * (1 - 1e-12)).any() || (pi_var.array() < kVarFloor * (1 - 1e-12)).any())
    throw DomainError("GmmParams: variance below floor");
}

bool GmmParams::all_finite() const {
  return theta.weights().allFinite() && b_mean.allFinite() && b_var.allFinite() && pi_mean.allFinite() &&
         pi_var.allFinite() && eta.allFinite();
}

SwitchPosterior::SwitchPosterior(Vector phi) : phi_(std::move(phi)) {
  for (Eigen::Index d = 0; d < phi_.size(); ++d)
    if (!(phi_(d) >= 0.0 && phi_(d) <= 1.0)) throw DomainError("SwitchPosterior: entries must lie in [0, 1]");
}

SwitchPosterior SwitchPosterior::constant(std::size_t d, double value) {
  return SwitchPosterior(Vector::Constant(static_cast<Eigen::Index>(d), value));
}

double EmConfig::effective_p() const { return effective_switch_prior(p); }

void EmConfig::validate() const {
  if (!(p >= 0.0 && p <= 1.0)) throw UsageError("switch prior p must be in [0, 1]");
  if (K < 1) throw UsageError("component budget K must be positive");
  if (max_iters < 1) throw UsageError("max_iters must be positive");
  if (!(rel_tol > 0.0)) throw UsageError("rel_tol must be positive");
  if (n_restarts < 1) throw UsageError("n_restarts must be positive");
  if (!(alpha >= 1.0)) throw UsageError("alpha must be >= 1");
}

// ---- model ------------------------------------------------------------------

double effective_switch_prior(double p) {
  if (p == 0.0 || p == 1.0) return p;
  return std::clamp(p, 1e-6, 1.0 - 1e-6);
}

double switch_kl_term(const SwitchPosterior& phi, double p) {
  p = effective_switch_prior(p);
  const double log_p = std::log(p), log_1mp = std::log1p(-p);
  double total = 0.0;
  for (std::size_t d = 0; d < phi.size(); ++d) {
    const double f = phi[d];
    if (f > 0.0) total += f * (log_p - std::log(f));
    if (f < 1.0) total += (1.0 - f) * (log_1mp - std::log1p(-f));
  }
  return total;
}

GmmParams init_params(const Dataset& data, const EmConfig& cfg, std::uint64_t stream) {
  const std::size_t N = data.size(), D = data.dims();
  const auto K = static_cast<std::size_t>(cfg.K);
  if (D < 1) throw UsageError("init_params: need at least one input dimension");
  if (N < K) throw UsageError("init_params: fewer data points than components");
  Rng rng(cfg.seed, stream_id(stream, kInitPurpose));

  const auto cols = kernels::column_moments(data.X, cfg.backend);
  const Vector var = cols.var.cwiseMax(kVarFloor);

  GmmParams params;
  params.theta = Simplex::uniform(K);
  params.b_mean.resize(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(D));
  const auto picks = rng.sample_without_replacement(N, K);
  for (std::size_t k = 0; k < K; ++k)
    params.b_mean.row(static_cast<Eigen::Index>(k)) = data.X.row(static_cast<Eigen::Index>(picks[k]));
  params.b_var = var.transpose().replicate(static_cast<Eigen::Index>(K), 1);
  params.pi_mean = cols.mean;
  params.pi_var = var;

  const int C = std::max(data.n_classes, 1);
  Vector freq = Vector::Zero(C);
  if (data.labeled()) {
    for (int v : data.y) freq(v) += 1.0;
    freq /= static_cast<double>(N);
  } else {
    freq.setConstant(1.0 / C);
  }
  params.eta.resize(static_cast<Eigen::Index>(K), C);
  for (std::size_t k = 0; k < K; ++k) {
    Vector row = freq;
    for (int c = 0; c < C; ++c) row(c) += kEtaInitNoise * (2.0 * rng.uniform() - 1.0);
    row = row.cwiseMax(kProbFloor);
    params.eta.row(static_cast<Eigen::Index>(k)) = (row / row.sum()).transpose();
  }
  return params;
}

Responsibilities e_step_z(const GmmParams& params, const SwitchPosterior& phi, const Matrix& X,
                          std::span<const int> y, Backend backend) {
  check_shapes(params, X, y);
  check_finite_input(X);
  Matrix scores;
  kernels::expected_log_emission(X, params, phi.values(), scores, backend);
  add_prior_and_target(scores, params, y);
  Responsibilities out;
  Vector lse;
  kernels::normalize_rows(scores, out.r, lse, backend);
  return out;
}

SwitchPosterior update_phi(const GmmParams& params, const Responsibilities& resp, const Matrix& X, double p,
                           Backend backend) {
  if (!(p >= 0.0 && p <= 1.0)) throw UsageError("update_phi: p must be in [0, 1]");
  if (resp.r.rows() != X.rows() || static_cast<std::size_t>(resp.r.cols()) != params.K())
    throw UsageError("update_phi: responsibilities shape mismatch");
  const auto D = static_cast<std::size_t>(X.cols());
  if (p == 0.0) return SwitchPosterior::constant(D, 0.0);
  if (p == 1.0) return SwitchPosterior::constant(D, 1.0);
  const double pe = effective_switch_prior(p);
  const double prior_logit = std::log(pe) - std::log1p(-pe);
  const Vector gap = kernels::switch_gap(X, params, resp.r, backend);
  Vector phi(static_cast<Eigen::Index>(D));
  const double n = static_cast<double>(X.rows());
  for (Eigen::Index d = 0; d < phi.size(); ++d) phi(d) = sigmoid(prior_logit + gap(d) / n);
  return SwitchPosterior(std::move(phi));
}

GmmParams m_step_pooled(const Responsibilities& resp, const SwitchPosterior& phi, const Matrix& X,
                        std::span<const int> y, const Vector& first_step_mass, std::size_t n_units,
                        const EmConfig& cfg, const GmmParams& previous, Rng& rng, std::size_t* rescued) {
  const Eigen::Index N = X.rows(), D = X.cols(), K = resp.r.cols();
  if (resp.r.rows() != N || static_cast<std::size_t>(K) != previous.K())
    throw UsageError("m_step: responsibilities shape mismatch");

  const auto mom = kernels::weighted_moments(X, resp.r, cfg.backend);
  const auto cols = kernels::column_moments(X, cfg.backend);
  const Vector global_var = cols.var.cwiseMax(kVarFloor);

  GmmParams next = previous;
  for (Eigen::Index k = 0; k < K; ++k) {
    if (mom.mass(k) < kEmptyComponentMass) {
      const auto idx = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(N)));
      next.b_mean.row(k) = X.row(idx);
      next.b_var.row(k) = global_var.transpose();
      if (rescued) ++*rescued;
      continue;
    }
    for (Eigen::Index d = 0; d < D; ++d) {
      if (phi[static_cast<std::size_t>(d)] == 0.0) continue;
      next.b_mean(k, d) = mom.mean(k, d);
      next.b_var(k, d) = std::max(mom.var(k, d), kVarFloor);
    }
  }
  for (Eigen::Index d = 0; d < D; ++d) {
    if (phi[static_cast<std::size_t>(d)] == 1.0) continue;
    next.pi_mean(d) = cols.mean(d);
    next.pi_var(d) = global_var(d);
  }

  Vector theta_mass = (first_step_mass.array() + (cfg.alpha - 1.0)).matrix();
  (void)n_units;  // theta_k = (alpha - 1 + m_k) / (K alpha - K + n_units); sum_k m_k == n_units
  next.theta = Simplex::normalized(theta_mass);

  if (cfg.use_labels && !y.empty()) {
    Matrix counts = Matrix::Zero(K, previous.eta.cols());
    for (Eigen::Index n = 0; n < N; ++n)
      for (Eigen::Index k = 0; k < K; ++k) counts(k, y[static_cast<std::size_t>(n)]) += resp.r(n, k);
    next.eta = floored_row_normalize(counts);
  }
  return next;
}

GmmParams m_step(const Responsibilities& resp, const SwitchPosterior& phi, const Matrix& X, std::span<const int> y,
                 const EmConfig& cfg, const GmmParams& previous, Rng& rng, std::size_t* rescued) {
  const Vector mass = resp.r.colwise().sum().transpose();
  return m_step_pooled(resp, phi, X, y, mass, static_cast<std::size_t>(X.rows()), cfg, previous, rng, rescued);
}

double elbo(const GmmParams& params, const SwitchPosterior& phi, const Matrix& X, std::span<const int> y, double p,
            Backend backend) {
  check_shapes(params, X, y);
  Matrix scores;
  kernels::expected_log_emission(X, params, phi.values(), scores, backend);
  add_prior_and_target(scores, params, y);
  double total = 0.0;
  for (Eigen::Index n = 0; n < scores.rows(); ++n) total += log_sum_exp(scores.row(n));
  return total + static_cast<double>(X.rows()) * switch_kl_term(phi, p);
}

double dirichlet_log_prior(const Simplex& theta, double alpha) {
  if (alpha == 1.0) return 0.0;
  return (alpha - 1.0) * theta.weights().array().log().sum();
}

namespace {

struct RunResult {
  GmmParams params;
  SwitchPosterior phi;
  std::vector<double> trace;
  bool converged = false;
  std::size_t rescues = 0;
};

RunResult run_em(const Dataset& data, const EmConfig& cfg, std::uint64_t restart) {
  const double p = cfg.effective_p();
  const std::span<const int> y = cfg.use_labels ? data.labels() : std::span<const int>{};
  Rng rescue_rng(cfg.seed, stream_id(restart, kRescuePurpose));

  RunResult run;
  run.params = init_params(data, cfg, restart);
  run.phi = SwitchPosterior::constant(data.dims(), p);
  for (int it = 0; it < cfg.max_iters; ++it) {
    const auto resp = e_step_z(run.params, run.phi, data.X, y, cfg.backend);
    run.phi = update_phi(run.params, resp, data.X, p, cfg.backend);
    run.params = m_step(resp, run.phi, data.X, y, cfg, run.params, rescue_rng, &run.rescues);
    const double value =
        elbo(run.params, run.phi, data.X, y, p, cfg.backend) + dirichlet_log_prior(run.params.theta, cfg.alpha);
    if (!std::isfinite(value) || !run.params.all_finite()) throw NumericError("EM produced a non-finite objective");
    run.trace.push_back(value);
    if (run.trace.size() >= 2) {
      const double prev = run.trace[run.trace.size() - 2];
      if (std::abs(value - prev) <= cfg.rel_tol * std::abs(prev)) {
        run.converged = true;
        break;
      }
    }
  }
  return run;
}

}  // namespace

FitResult fit(const Dataset& data, const EmConfig& cfg) {
  cfg.validate();
  data.validate();
  if (cfg.use_labels && !data.labeled()) throw UsageError("fit: labeled data required");
  if (data.size() < static_cast<std::size_t>(cfg.K)) throw UsageError("fit: fewer data points than components");

  FitResult best;
  bool have = false;
  for (int r = 0; r < cfg.n_restarts; ++r) {
    auto run = run_em(data, cfg, static_cast<std::uint64_t>(r));
    if (!have || run.trace.back() > best.elbo_trace.back()) {
      best.params = std::move(run.params);
      best.phi = std::move(run.phi);
      best.elbo_trace = std::move(run.trace);
      best.converged = run.converged;
      best.iterations = static_cast<int>(best.elbo_trace.size());
      best.best_restart = r;
      best.rescues = run.rescues;
      have = true;
    }
  }
  best.seed = cfg.seed;
  return best;
}

Matrix posterior_z(const GmmParams& params, const SwitchPosterior& phi, const Matrix& X, Backend backend) {
  return e_step_z(params, phi, X, {}, backend).r;
}

Matrix predict_proba(const GmmParams& params, const SwitchPosterior& phi, const Matrix& X, Backend backend) {
  const Matrix q = posterior_z(params, phi, X, backend);
  Matrix out = q * params.eta;
  for (Eigen::Index n = 0; n < out.rows(); ++n) out.row(n) /= out.row(n).sum();
  return out;
}

double exact_log_joint(const GmmParams& params, double p, const Matrix& X, std::span<const int> y, Backend backend) {
  check_shapes(params, X, y);
  const auto configs = kernels::switch_config_log_joint(X, y, params, effective_switch_prior(p), backend);
  return log_sum_exp(configs);
}

double alt_bound_objective(const GmmParams& params, double p, const Matrix& X, std::span<const int> y,
                           Backend backend) {
  check_shapes(params, X, y);
  p = effective_switch_prior(p);
  double predictive = 0.0;
  if (!y.empty()) {
    const auto joint = kernels::switch_config_log_joint(X, y, params, p, backend);
    const auto marginal = kernels::switch_config_log_joint(X, {}, params, p, backend);
    const double log_p = std::log(p), log_1mp = std::log1p(-p);
    for (std::uint64_t s = 0; s < joint.size(); ++s) {
      double log_prior = 0.0;
      for (std::size_t d = 0; d < params.D(); ++d) log_prior += ((s >> d) & 1U) ? log_p : log_1mp;
      if (log_prior == -std::numeric_limits<double>::infinity()) continue;
      predictive += std::exp(log_prior) * (joint[s] - marginal[s]);
    }
  }

  const auto t = kernels::GaussianTables::from(params);
  double signal = 0.0, noise = 0.0;
  for (Eigen::Index n = 0; n < X.rows(); ++n)
    for (Eigen::Index d = 0; d < X.cols(); ++d) {
      noise += gaussian_log_pdf(X(n, d), params.pi_mean(d), params.pi_var(d));
      for (std::size_t k = 0; k < params.K(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        signal += params.theta[k] * gaussian_log_pdf(X(n, d), params.b_mean(kk, d), params.b_var(kk, d));
      }
    }
  (void)t;
  return predictive + p * signal + (1.0 - p) * noise;
}

}  // namespace pfmix
