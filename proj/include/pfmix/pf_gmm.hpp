#pragma once

// Prediction-focused Gaussian mixture: each input dimension d carries a
// switch that routes it either to the component-specific signal Gaussian
// B_{k,d} or to the shared noise Gaussian pi_d. Training is variational EM
// with a per-datum switch posterior tied across data (phi_d).

#include <span>

#include "pfmix/data.hpp"
#include "pfmix/params.hpp"
#include "pfmix/rng.hpp"

namespace pfmix {

/// Maps p to the value used in the objective: exact 0 and 1 are kept,
/// anything else is clamped to [1e-6, 1 - 1e-6].
double effective_switch_prior(double p);

/// Per-datum switch prior/entropy term sum_d [phi ln(p/phi) + (1-phi) ln((1-p)/(1-phi))],
/// with 0 ln 0 = 0.
double switch_kl_term(const SwitchPosterior& phi, double p);

/// Seeded initialization. `stream` selects an independent random stream
/// (restart index). Throws UsageError when N < K.
GmmParams init_params(const Dataset& data, const EmConfig& cfg, std::uint64_t stream = 0);

/// q(Z | x, y, phi) using the expected log-likelihood under q(xi).
/// Pass an empty `y` to leave the target out.
Responsibilities e_step_z(const GmmParams& params, const SwitchPosterior& phi, const Matrix& X,
                          std::span<const int> y, Backend backend = Backend::parallel);

/// Closed-form switch update; p = 0 and p = 1 give constant 0 / 1.
SwitchPosterior update_phi(const GmmParams& params, const Responsibilities& resp, const Matrix& X, double p,
                           Backend backend = Backend::parallel);

/// Parameter updates pooled over the rows of X. `first_step_mass` holds
/// sum over units of q(Z_1 = k) and `n_units` the number of units (data points
/// for a mixture, sequences for an HMM); both feed the theta update.
GmmParams m_step_pooled(const Responsibilities& resp, const SwitchPosterior& phi, const Matrix& X,
                        std::span<const int> y, const Vector& first_step_mass, std::size_t n_units,
                        const EmConfig& cfg, const GmmParams& previous, Rng& rng, std::size_t* rescued = nullptr);

GmmParams m_step(const Responsibilities& resp, const SwitchPosterior& phi, const Matrix& X, std::span<const int> y,
                 const EmConfig& cfg, const GmmParams& previous, Rng& rng, std::size_t* rescued = nullptr);

/// ELBO maximized over q(Z) for fixed (params, phi):
/// sum_n log sum_k exp(score_nk) + N * switch_kl_term(phi, p).
double elbo(const GmmParams& params, const SwitchPosterior& phi, const Matrix& X, std::span<const int> y, double p,
            Backend backend = Backend::parallel);

/// (alpha - 1) sum_k ln theta_k; added to the traced objective when alpha > 1.
double dirichlet_log_prior(const Simplex& theta, double alpha);

/// Variational EM with restarts; the restart with the highest final
/// objective wins (lowest index on ties).
FitResult fit(const Dataset& data, const EmConfig& cfg);

/// q(Z | x, phi) without the target term (N x K).
Matrix posterior_z(const GmmParams& params, const SwitchPosterior& phi, const Matrix& X,
                   Backend backend = Backend::parallel);

/// Predictive class probabilities sum_k q(Z = k | x, phi) eta_k (N x C).
Matrix predict_proba(const GmmParams& params, const SwitchPosterior& phi, const Matrix& X,
                     Backend backend = Backend::parallel);

/// Exact log p(X, Y) with one switch vector shared by all data, by
/// enumerating the 2^D switch configurations. Pass an empty `y` for log p(X).
/// Throws UsageError for D > 20.
double exact_log_joint(const GmmParams& params, double p, const Matrix& X, std::span<const int> y,
                       Backend backend = Backend::parallel);

/// E_{p(xi)}[ln p(Y | X, xi)] + p E_{p(Z)}[ln p_B(X | Z)] + (1 - p) ln p_pi(X).
/// A lower bound on exact_log_joint; same D limit.
double alt_bound_objective(const GmmParams& params, double p, const Matrix& X, std::span<const int> y,
                           Backend backend = Backend::parallel);

}  // namespace pfmix
