#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "../oracles.hpp"
#include "pfmix/baselines.hpp"
#include "pfmix/pf_gmm.hpp"

using namespace pfmix;

namespace {

SwitchPosterior phi_of(const Vector& v) { return SwitchPosterior(v); }

Responsibilities random_resp(std::mt19937_64& g, int N, int K) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  Responsibilities r;
  r.r.resize(N, K);
  for (int n = 0; n < N; ++n) {
    for (int k = 0; k < K; ++k) r.r(n, k) = u(g);
    r.r.row(n) /= r.r.row(n).sum();
  }
  return r;
}

}  // namespace

TEST_CASE("switch prior helpers") {
  CHECK(effective_switch_prior(0.0) == 0.0);
  CHECK(effective_switch_prior(1.0) == 1.0);
  CHECK(effective_switch_prior(1e-9) == 1e-6);
  CHECK(effective_switch_prior(1.0 - 1e-9) == 1.0 - 1e-6);
  CHECK(switch_kl_term(SwitchPosterior::constant(3, 1.0), 1.0) == 0.0);
  CHECK(switch_kl_term(SwitchPosterior::constant(3, 0.0), 0.0) == 0.0);
  CHECK(switch_kl_term(SwitchPosterior::constant(2, 0.3), 0.3) == doctest::Approx(0.0));
  // phi = 0.5, p = 0.25: 0.5 ln(0.5) + 0.5 ln(1.5)
  CHECK(switch_kl_term(SwitchPosterior::constant(1, 0.5), 0.25) ==
        doctest::Approx(0.5 * std::log(0.5) + 0.5 * std::log(1.5)).epsilon(1e-14));
}

TEST_CASE("init_params") {
  std::mt19937_64 g(1);
  auto data = oracle::random_data(g, 20, 3, 2);
  EmConfig cfg;
  cfg.K = 1;
  cfg.seed = 4;
  const auto p1 = init_params(data, cfg);
  CHECK(p1.theta[0] == 1.0);
  bool found = false;
  for (int n = 0; n < 20; ++n) found = found || (data.X.row(n) == p1.b_mean.row(0));
  CHECK(found);

  cfg.K = 3;
  const auto a = init_params(data, cfg), b = init_params(data, cfg);
  CHECK(a.b_mean == b.b_mean);
  CHECK(a.eta == b.eta);
  CHECK(a.b_mean.row(0) != a.b_mean.row(1));
  CHECK(a.pi_mean.isApprox(data.X.colwise().mean().transpose()));
  for (int k = 0; k < 3; ++k) CHECK(std::abs(a.eta.row(k).sum() - 1.0) < 1e-12);

  data.X.col(1).setConstant(2.5);
  const auto c = init_params(data, cfg);
  CHECK(c.pi_var(1) == kVarFloor);
  CHECK((c.b_var.col(1).array() == kVarFloor).all());

  cfg.K = 21;
  CHECK_THROWS_AS(init_params(data, cfg), UsageError);
}

TEST_CASE("e_step_z") {
  std::mt19937_64 g(2);
  const auto data = oracle::random_data(g, 15, 4, 2);
  const auto params = oracle::random_params(g, 3, 4, 2);

  SUBCASE("switches off and no target gives theta") {
    const auto r = e_step_z(params, SwitchPosterior::constant(4, 0.0), data.X, {});
    for (int n = 0; n < 15; ++n)
      for (int k = 0; k < 3; ++k) CHECK(std::abs(r.r(n, k) - params.theta[k]) < 1e-12);
  }
  SUBCASE("K = 1") {
    const auto p1 = oracle::random_params(g, 1, 4, 2);
    const auto r = e_step_z(p1, phi_of(oracle::random_phi(g, 4)), data.X, data.y);
    CHECK((r.r.array() == 1.0).all());
  }
  SUBCASE("direct normalized product") {
    const Vector phi = oracle::random_phi(g, 4);
    const auto r = e_step_z(params, phi_of(phi), data.X, data.y);
    for (int n = 0; n < 15; ++n) {
      std::vector<double> s(3);
      for (int k = 0; k < 3; ++k)
        s[k] = std::log(params.theta[k]) + oracle::emission(params, phi, data.X, n, k) + std::log(params.eta(k, data.y[n]));
      const double z = oracle::lse(s);
      for (int k = 0; k < 3; ++k) CHECK(std::abs(r.r(n, k) - std::exp(s[k] - z)) < 1e-11);
    }
  }
  SUBCASE("NaN input") {
    Matrix X = data.X;
    X(3, 1) = std::nan("");
    CHECK_THROWS_AS(e_step_z(params, SwitchPosterior::constant(4, 0.5), X, {}), DataError);
  }
}

TEST_CASE("update_phi") {
  SUBCASE("hand case N=2, K=1, D=1") {
    GmmParams p;
    p.theta = Simplex::uniform(1);
    p.b_mean = Matrix::Constant(1, 1, 1.0);
    p.b_var = Matrix::Constant(1, 1, 0.5);
    p.pi_mean = Vector::Constant(1, 0.0);
    p.pi_var = Vector::Constant(1, 2.0);
    p.eta = Matrix::Constant(1, 2, 0.5);
    Matrix X(2, 1);
    X << 0.3, 1.7;
    Responsibilities r{Matrix::Ones(2, 1)};
    const double pp = 0.2;
    double gap = 0.0;
    for (int n = 0; n < 2; ++n) {
      const double lb = -0.5 * std::log(2 * M_PI * 0.5) - (X(n, 0) - 1.0) * (X(n, 0) - 1.0) / (2 * 0.5);
      const double ln = -0.5 * std::log(2 * M_PI * 2.0) - X(n, 0) * X(n, 0) / (2 * 2.0);
      gap += lb - ln;
    }
    const double want = 1.0 / (1.0 + std::exp(-(std::log(pp / (1 - pp)) + gap / 2)));
    CHECK(std::abs(update_phi(p, r, X, pp)[0] - want) < 1e-14);
  }
  SUBCASE("equal signal and noise gives phi = p = 0.5") {
    GmmParams p;
    p.theta = Simplex::uniform(2);
    p.b_mean = Matrix::Zero(2, 2);
    p.b_var = Matrix::Ones(2, 2);
    p.pi_mean = Vector::Zero(2);
    p.pi_var = Vector::Ones(2);
    p.eta = Matrix::Constant(2, 2, 0.5);
    std::mt19937_64 g(3);
    const auto data = oracle::random_data(g, 9, 2, 2);
    const auto phi = update_phi(p, random_resp(g, 9, 2), data.X, 0.5);
    CHECK(phi[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(phi[1] == doctest::Approx(0.5).epsilon(1e-14));
  }
  SUBCASE("p = 0 and p = 1 are constants") {
    std::mt19937_64 g(4);
    const auto data = oracle::random_data(g, 9, 3, 2);
    const auto params = oracle::random_params(g, 2, 3, 2);
    const auto r = random_resp(g, 9, 2);
    CHECK((update_phi(params, r, data.X, 1.0).values().array() == 1.0).all());
    CHECK((update_phi(params, r, data.X, 0.0).values().array() == 0.0).all());
  }
  SUBCASE("invariant to permuting the data") {
    std::mt19937_64 g(5);
    const auto data = oracle::random_data(g, 40, 3, 2);
    const auto params = oracle::random_params(g, 2, 3, 2);
    const auto r = random_resp(g, 40, 2);
    std::vector<int> perm(40);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), g);
    Matrix X2(40, 3), R2(40, 2);
    for (int i = 0; i < 40; ++i) {
      X2.row(i) = data.X.row(perm[i]);
      R2.row(i) = r.r.row(perm[i]);
    }
    const auto a = update_phi(params, r, data.X, 0.3, Backend::serial);
    const auto b = update_phi(params, Responsibilities{R2}, X2, 0.3, Backend::serial);
    CHECK((a.values() - b.values()).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("phi maximizes the coordinate objective") {
    // ELBO with q(Z) held fixed is concave in each phi_d; the update is its argmax.
    std::mt19937_64 g(6);
    const auto data = oracle::random_data(g, 25, 2, 2);
    const auto params = oracle::random_params(g, 2, 2, 2);
    const auto r = random_resp(g, 25, 2);
    const double p = 0.3;
    auto objective = [&](const Vector& phi) {
      double v = 25 * switch_kl_term(SwitchPosterior(phi), p);
      for (int n = 0; n < 25; ++n)
        for (int k = 0; k < 2; ++k) v += r.r(n, k) * oracle::emission(params, phi, data.X, n, k);
      return v;
    };
    const Vector best = update_phi(params, r, data.X, p).values();
    for (double h : {-1e-3, 1e-3}) {
      Vector q = best;
      q(0) += h;
      CHECK(objective(q) < objective(best));
      q = best;
      q(1) += h;
      CHECK(objective(q) < objective(best));
    }
  }
}

TEST_CASE("m_step closed forms") {
  std::mt19937_64 g(7);
  const auto data = oracle::random_data(g, 30, 3, 2);
  const auto prev = oracle::random_params(g, 2, 3, 2);
  Rng rng(0);

  SUBCASE("weighted statistics oracle") {
    const auto r = random_resp(g, 30, 2);
    EmConfig cfg;
    cfg.K = 2;
    cfg.alpha = 2.5;
    const auto next = m_step(r, SwitchPosterior::constant(3, 0.5), data.X, data.y, cfg, prev, rng);
    for (int k = 0; k < 2; ++k) {
      double mass = 0;
      for (int n = 0; n < 30; ++n) mass += r.r(n, k);
      CHECK(std::abs(next.theta[k] - (cfg.alpha - 1 + mass) / (2 * cfg.alpha - 2 + 30)) < 1e-12);
      for (int d = 0; d < 3; ++d) {
        double m = 0, v = 0;
        for (int n = 0; n < 30; ++n) m += r.r(n, k) * data.X(n, d) / mass;
        for (int n = 0; n < 30; ++n) v += r.r(n, k) * (data.X(n, d) - m) * (data.X(n, d) - m) / mass;
        CHECK(std::abs(next.b_mean(k, d) - m) < 1e-10);
        CHECK(std::abs(next.b_var(k, d) - v) < 1e-10);
      }
      double c0 = 0, c1 = 0;
      for (int n = 0; n < 30; ++n) (data.y[n] == 0 ? c0 : c1) += r.r(n, k);
      CHECK(std::abs(next.eta(k, 0) - c0 / (c0 + c1)) < 1e-10);
    }
    for (int d = 0; d < 3; ++d) {
      const double m = data.X.col(d).mean();
      CHECK(std::abs(next.pi_mean(d) - m) < 1e-12);
      CHECK(std::abs(next.pi_var(d) - (data.X.col(d).array() - m).square().mean()) < 1e-12);
    }
  }
  SUBCASE("K = 1 reduces to column moments, alpha = 1 to the mass share") {
    const auto p1 = oracle::random_params(g, 1, 3, 2);
    EmConfig cfg;
    cfg.K = 1;
    const auto next = m_step(Responsibilities{Matrix::Ones(30, 1)}, SwitchPosterior::constant(3, 0.5), data.X,
                             data.y, cfg, p1, rng);
    CHECK(next.b_mean.row(0).transpose().isApprox(next.pi_mean, 1e-12));
    CHECK(next.b_var.row(0).transpose().isApprox(next.pi_var, 1e-12));
    CHECK(next.theta[0] == 1.0);
  }
  SUBCASE("switch guards keep previous values") {
    EmConfig cfg;
    cfg.K = 2;
    Vector phi(3);
    phi << 0.0, 1.0, 0.4;
    const auto next = m_step(random_resp(g, 30, 2), SwitchPosterior(phi), data.X, data.y, cfg, prev, rng);
    CHECK(next.b_mean.col(0) == prev.b_mean.col(0));
    CHECK(next.b_var.col(0) == prev.b_var.col(0));
    CHECK(next.pi_mean(1) == prev.pi_mean(1));
    CHECK(next.pi_var(1) == prev.pi_var(1));
    CHECK(next.b_mean.col(2) != prev.b_mean.col(2));
    CHECK(next.pi_mean(2) != prev.pi_mean(2));
  }
  SUBCASE("empty component is reseeded") {
    EmConfig cfg;
    cfg.K = 2;
    Matrix r = Matrix::Zero(30, 2);
    r.col(0).setOnes();
    std::size_t rescued = 0;
    const auto next = m_step(Responsibilities{r}, SwitchPosterior::constant(3, 0.5), data.X, data.y, cfg, prev, rng,
                             &rescued);
    CHECK(rescued == 1);
    bool is_row = false;
    for (int n = 0; n < 30; ++n) is_row = is_row || next.b_mean.row(1) == data.X.row(n);
    CHECK(is_row);
    CHECK(next.b_var.row(1).transpose().isApprox(next.pi_var, 1e-12));
    CHECK(next.all_finite());
  }
}

TEST_CASE("elbo and exact enumeration") {
  std::mt19937_64 g(8);
  SUBCASE("N = 1, K = 1 with the exact switch posterior is tight") {
    for (int rep = 0; rep < 10; ++rep) {
      const auto data = oracle::random_data(g, 1, 4, 2);
      const auto params = oracle::random_params(g, 1, 4, 2);
      const double p = 0.35;
      const auto phi = update_phi(params, Responsibilities{Matrix::Ones(1, 1)}, data.X, p);
      const double e = elbo(params, phi, data.X, data.y, p);
      CHECK(std::abs(e - oracle::exact_log_joint(params, p, data.X, data.y)) < 1e-9);
    }
  }
  SUBCASE("elbo and alt bound stay below the exact joint") {
    for (int rep = 0; rep < 10; ++rep) {
      const int D = 1 + rep % 5, K = 1 + rep % 3;
      const auto data = oracle::random_data(g, 8, D, 2);
      const auto params = oracle::random_params(g, K, D, 2);
      const double p = 0.1 + 0.08 * rep;
      const double exact = exact_log_joint(params, p, data.X, data.y);
      CHECK(std::abs(exact - oracle::exact_log_joint(params, p, data.X, data.y)) < 1e-9);
      CHECK(elbo(params, SwitchPosterior(oracle::random_phi(g, D)), data.X, data.y, p) <= exact + 1e-9);
      CHECK(alt_bound_objective(params, p, data.X, data.y) <= exact + 1e-9);
    }
  }
  SUBCASE("p = 1 and p = 0 closed forms") {
    const auto data = oracle::random_data(g, 6, 3, 2);
    const auto params = oracle::random_params(g, 2, 3, 2);
    double sup = 0.0, noise = 0.0;
    for (int n = 0; n < 6; ++n) {
      std::vector<double> s(2), t(2);
      for (int k = 0; k < 2; ++k) {
        s[k] = std::log(params.theta[k]) + std::log(params.eta(k, data.y[n]));
        t[k] = s[k];
        for (int d = 0; d < 3; ++d) {
          s[k] += oracle::log_normal(data.X(n, d), params.b_mean(k, d), params.b_var(k, d));
          noise += k == 0 ? oracle::log_normal(data.X(n, d), params.pi_mean(d), params.pi_var(d)) : 0.0;
        }
      }
      sup += oracle::lse(s);
      noise += oracle::lse(t);
    }
    CHECK(std::abs(exact_log_joint(params, 1.0, data.X, data.y) - sup) < 1e-10);
    CHECK(std::abs(elbo(params, SwitchPosterior::constant(3, 1.0), data.X, data.y, 1.0) - sup) < 1e-10);
    CHECK(std::abs(exact_log_joint(params, 0.0, data.X, data.y) - noise) < 1e-10);
    CHECK(std::abs(alt_bound_objective(params, 0.0, data.X, data.y) - noise) < 1e-10);
  }
  SUBCASE("alt bound at p = 1") {
    const auto data = oracle::random_data(g, 6, 2, 2);
    const auto params = oracle::random_params(g, 2, 2, 2);
    double want = 0.0;
    for (int n = 0; n < 6; ++n) {
      std::vector<double> joint(2), marg(2);
      for (int k = 0; k < 2; ++k) {
        double lb = 0.0;
        for (int d = 0; d < 2; ++d) lb += oracle::log_normal(data.X(n, d), params.b_mean(k, d), params.b_var(k, d));
        marg[k] = std::log(params.theta[k]) + lb;
        joint[k] = marg[k] + std::log(params.eta(k, data.y[n]));
        want += params.theta[k] * lb;
      }
      want += oracle::lse(joint) - oracle::lse(marg);
    }
    CHECK(std::abs(alt_bound_objective(params, 1.0, data.X, data.y) - want) < 1e-10);
  }
  SUBCASE("D too large") {
    const auto data = oracle::random_data(g, 2, 21, 2);
    const auto params = oracle::random_params(g, 1, 21, 2);
    CHECK_THROWS_AS(exact_log_joint(params, 0.5, data.X, data.y), UsageError);
  }
}

TEST_CASE("fit") {
  std::mt19937_64 g(9);
  const auto data = oracle::random_data(g, 120, 4, 2);
  EmConfig cfg;
  cfg.K = 3;
  cfg.n_restarts = 2;
  cfg.max_iters = 60;
  cfg.seed = 12;

  SUBCASE("trace is non-decreasing and deterministic") {
    for (double p : {0.0, 0.2, 0.7, 1.0}) {
      cfg.p = p;
      const auto a = fit(data, cfg);
      for (std::size_t t = 1; t < a.elbo_trace.size(); ++t) CHECK(a.elbo_trace[t] >= a.elbo_trace[t - 1] - 1e-8);
      const auto b = fit(data, cfg);
      CHECK(a.elbo_trace == b.elbo_trace);
      CHECK(a.params.b_mean == b.params.b_mean);
    }
  }
  SUBCASE("Dirichlet prior keeps the traced objective monotone") {
    cfg.p = 0.4;
    cfg.alpha = 3.0;
    const auto a = fit(data, cfg);
    for (std::size_t t = 1; t < a.elbo_trace.size(); ++t) CHECK(a.elbo_trace[t] >= a.elbo_trace[t - 1] - 1e-8);
  }
  SUBCASE("p = 1 equals the supervised fit") {
    cfg.p = 1.0;
    const auto a = fit(data, cfg);
    const auto b = fit_sup_gmm(data, cfg);
    CHECK(a.elbo_trace == b.elbo_trace);
    CHECK(a.params.b_mean == b.params.b_mean);
    CHECK((b.phi.values().array() == 1.0).all());
  }
  SUBCASE("serial and parallel backends agree") {
    cfg.p = 0.3;
    cfg.backend = Backend::serial;
    const auto a = fit(data, cfg);
    cfg.backend = Backend::parallel;
    const auto b = fit(data, cfg);
    REQUIRE(a.elbo_trace.size() == b.elbo_trace.size());
    CHECK(std::abs(a.elbo_trace.back() - b.elbo_trace.back()) < 1e-8 * std::abs(a.elbo_trace.back()));
  }
  SUBCASE("bad configuration") {
    cfg.p = 1.5;
    CHECK_THROWS_AS(fit(data, cfg), UsageError);
    cfg.p = 0.5;
    cfg.alpha = 0.5;
    CHECK_THROWS_AS(fit(data, cfg), UsageError);
  }
}

TEST_CASE("predict_proba") {
  std::mt19937_64 g(10);
  const auto data = oracle::random_data(g, 10, 3, 2);
  auto params = oracle::random_params(g, 2, 3, 2);
  const Vector phi = oracle::random_phi(g, 3);

  const Matrix pr = predict_proba(params, SwitchPosterior(phi), data.X);
  for (int n = 0; n < 10; ++n) {
    double w[2];
    for (int k = 0; k < 2; ++k) w[k] = std::log(params.theta[k]) + oracle::emission(params, phi, data.X, n, k);
    const double q0 = 1.0 / (1.0 + std::exp(w[1] - w[0]));
    CHECK(std::abs(pr(n, 1) - (q0 * params.eta(0, 1) + (1 - q0) * params.eta(1, 1))) < 1e-12);
  }

  const Matrix off = predict_proba(params, SwitchPosterior::constant(3, 0.0), data.X);
  const Vector prior = params.eta.transpose() * params.theta.weights();
  for (int n = 0; n < 10; ++n) CHECK((off.row(n).transpose() - prior).cwiseAbs().maxCoeff() < 1e-12);

  params.eta.setConstant(0.5);
  CHECK((predict_proba(params, SwitchPosterior(phi), data.X).array() - 0.5).abs().maxCoeff() < 1e-15);
}
