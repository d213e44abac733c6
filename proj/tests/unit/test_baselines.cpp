#include <doctest.h>

#include <random>

#include "../oracles.hpp"
#include "pfmix/baselines.hpp"
#include "pfmix/eval.hpp"

using namespace pfmix;

TEST_CASE("logreg gradient against finite differences") {
  std::mt19937_64 g(1);
  const auto data = oracle::random_data(g, 40, 3, 3);
  LogRegModel m;
  std::normal_distribution<double> nd;
  m.weights.resize(3, 3);
  m.bias.resize(3);
  for (int c = 0; c < 3; ++c) {
    m.bias(c) = nd(g);
    for (int d = 0; d < 3; ++d) m.weights(c, d) = nd(g);
  }
  m.l2 = 0.05;
  const Vector grad = logreg_gradient(m, data.X, data.y);
  REQUIRE(grad.size() == 12);
  const double h = 1e-6;
  for (int i = 0; i < 12; ++i) {
    LogRegModel a = m, b = m;
    double* pa = i < 9 ? &a.weights(i / 3, i % 3) : &a.bias(i - 9);
    double* pb = i < 9 ? &b.weights(i / 3, i % 3) : &b.bias(i - 9);
    *pa += h;
    *pb -= h;
    const double fd = (logreg_objective(a, data.X, data.y) - logreg_objective(b, data.X, data.y)) / (2 * h);
    CHECK(std::abs(fd - grad(i)) < 1e-5);
  }
}

TEST_CASE("fit_logreg") {
  SUBCASE("separable 1-D data") {
    Matrix X(20, 1);
    std::vector<int> y;
    for (int i = 0; i < 20; ++i) {
      X(i, 0) = i - 9.5;
      y.push_back(i >= 10 ? 1 : 0);
    }
    LogRegTrace tr;
    const auto m = fit_logreg(X, y, 2, {}, &tr);
    CHECK(multiclass_auroc(m.predict_proba(X), y) == 1.0);
    for (std::size_t i = 1; i < tr.objective.size(); ++i) CHECK(tr.objective[i] <= tr.objective[i - 1]);
  }
  SUBCASE("converges to a small gradient") {
    std::mt19937_64 g(2);
    const auto data = oracle::random_data(g, 200, 4, 2);
    LogRegTrace tr;
    const auto m = fit_logreg(data.X, data.y, 2, {}, &tr);
    CHECK(tr.converged);
    CHECK(logreg_gradient(m, data.X, data.y).norm() <= 1e-6);
    for (std::size_t i = 1; i < tr.objective.size(); ++i) CHECK(tr.objective[i] <= tr.objective[i - 1]);
    // labels are independent of X here
    const auto test = oracle::random_data(g, 2000, 4, 2);
    CHECK(std::abs(multiclass_auroc(m.predict_proba(test.X), test.y) - 0.5) < 0.05);
  }
  SUBCASE("rows are simplexes") {
    std::mt19937_64 g(3);
    const auto data = oracle::random_data(g, 50, 2, 3);
    const auto m = fit_logreg(data.X, data.y, 3);
    const Matrix P = m.predict_proba(data.X);
    CHECK((P.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
  }
  SUBCASE("non-finite input") {
    Matrix X = Matrix::Zero(3, 1);
    X(1, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(fit_logreg(X, std::vector<int>{0, 1, 0}, 2), DataError);
  }
}

TEST_CASE("two-step mixture") {
  std::mt19937_64 g(4);
  EmConfig cfg;
  cfg.n_restarts = 2;
  cfg.seed = 3;

  SUBCASE("K = 1 predicts the class prior") {
    const auto data = oracle::random_data(g, 100, 2, 2);
    cfg.K = 1;
    const auto m = fit_2step(data, cfg);
    double prior = 0;
    for (int v : data.y) prior += v;
    prior /= 100.0;
    const Matrix P = m.predict_proba(data.X);
    CHECK((P.col(1).array() - P(0, 1)).abs().maxCoeff() < 1e-12);
    CHECK(std::abs(P(0, 1) - prior) < 1e-3);
  }
  SUBCASE("clusters equal classes") {
    std::normal_distribution<double> nd;
    Dataset d;
    d.X.resize(300, 2);
    for (int n = 0; n < 300; ++n) {
      const int c = n % 2;
      d.y.push_back(c);
      d.X(n, 0) = nd(g) + 5.0 * c;
      d.X(n, 1) = nd(g) - 5.0 * c;
    }
    d.n_classes = 2;
    cfg.K = 2;
    const auto m = fit_2step(d, cfg);
    CHECK(multiclass_auroc(m.predict_proba(d.X), d.y) >= 0.95);
  }
  SUBCASE("single-step sequences match the flat pipeline") {
    const auto flat = oracle::random_data(g, 60, 2, 2);
    std::vector<Matrix> xs;
    std::vector<std::vector<int>> ys;
    for (int n = 0; n < 60; ++n) {
      xs.push_back(flat.X.row(n));
      ys.push_back({flat.y[n]});
    }
    const auto seqs = SequenceDataset::assemble(xs, ys, 2);
    cfg.K = 2;
    const auto a = fit_2step(flat, cfg);
    const auto b = fit_2step_hmm(seqs, cfg);
    CHECK(a.generative.elbo_trace == b.generative.elbo_trace);
    CHECK((a.predict_proba(flat.X) - b.predict_proba(seqs)).cwiseAbs().maxCoeff() < 1e-12);
  }
}
