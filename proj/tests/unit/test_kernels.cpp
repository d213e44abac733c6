#include <doctest.h>

#include <omp.h>

#include <random>

#include "../oracles.hpp"
#include "pfmix/kernels.hpp"

using namespace pfmix;
namespace ks = pfmix::kernels;

namespace {

struct Case {
  Dataset data;
  GmmParams params;
  Vector phi;
  Matrix resp;
};

Case make_case(std::uint64_t seed, int N, int K, int D) {
  std::mt19937_64 g(seed);
  Case c;
  c.data = oracle::random_data(g, N, D, 2);
  c.params = oracle::random_params(g, K, D, 2);
  c.phi = oracle::random_phi(g, D);
  c.resp.resize(N, K);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int n = 0; n < N; ++n) {
    for (int k = 0; k < K; ++k) c.resp(n, k) = u(g);
    c.resp.row(n) /= c.resp.row(n).sum();
  }
  return c;
}

}  // namespace

TEST_CASE("serial kernels against direct formulas") {
  const auto c = make_case(1, 37, 3, 4);
  const Matrix& X = c.data.X;

  Matrix E;
  ks::serial::expected_log_emission(X, c.params, c.phi, E);
  Matrix Bl;
  ks::serial::blended_log_emission(X, c.params, c.phi, Bl);
  for (Eigen::Index n = 0; n < X.rows(); ++n)
    for (int k = 0; k < 3; ++k) {
      CHECK(std::abs(E(n, k) - oracle::emission(c.params, c.phi, X, n, k)) < 1e-11);
      long double blended = 0.0L;
      for (int d = 0; d < 4; ++d)
        blended += std::log(c.phi(d) * oracle::normal_pdf(X(n, d), c.params.b_mean(k, d), c.params.b_var(k, d)) +
                            (1 - c.phi(d)) * oracle::normal_pdf(X(n, d), c.params.pi_mean(d), c.params.pi_var(d)));
      CHECK(std::abs(Bl(n, k) - static_cast<double>(blended)) < 1e-11);
    }

  Matrix resp;
  Vector lse;
  ks::serial::normalize_rows(E, resp, lse);
  for (Eigen::Index n = 0; n < X.rows(); ++n) {
    CHECK(resp.row(n).sum() == doctest::Approx(1.0).epsilon(1e-14));
    std::vector<double> row(E.row(n).data(), E.row(n).data() + 3);
    CHECK(std::abs(lse(n) - oracle::lse(row)) < 1e-12);
  }

  const Vector gap = ks::serial::switch_gap(X, c.params, c.resp);
  for (int d = 0; d < 4; ++d) {
    double want = 0.0;
    for (Eigen::Index n = 0; n < X.rows(); ++n) {
      for (int k = 0; k < 3; ++k)
        want += c.resp(n, k) * oracle::log_normal(X(n, d), c.params.b_mean(k, d), c.params.b_var(k, d));
      want -= oracle::log_normal(X(n, d), c.params.pi_mean(d), c.params.pi_var(d));
    }
    CHECK(std::abs(gap(d) - want) < 1e-10);
  }

  const auto wm = ks::serial::weighted_moments(X, c.resp);
  for (int k = 0; k < 3; ++k) {
    const double mass = c.resp.col(k).sum();
    CHECK(std::abs(wm.mass(k) - mass) < 1e-12);
    for (int d = 0; d < 4; ++d) {
      double m = 0, v = 0;
      for (Eigen::Index n = 0; n < X.rows(); ++n) m += c.resp(n, k) * X(n, d);
      m /= mass;
      for (Eigen::Index n = 0; n < X.rows(); ++n) v += c.resp(n, k) * (X(n, d) - m) * (X(n, d) - m);
      CHECK(std::abs(wm.mean(k, d) - m) < 1e-12);
      CHECK(std::abs(wm.var(k, d) - v / mass) < 1e-11);
    }
  }

  const auto cm = ks::serial::column_moments(X);
  for (int d = 0; d < 4; ++d) {
    const double m = X.col(d).mean();
    CHECK(std::abs(cm.mean(d) - m) < 1e-12);
    CHECK(std::abs(cm.var(d) - (X.col(d).array() - m).square().mean()) < 1e-12);
  }
}

TEST_CASE("switch_config_log_joint sums to the exact joint") {
  const auto c = make_case(8, 12, 2, 3);
  const auto terms = ks::serial::switch_config_log_joint(c.data.X, c.data.y, c.params, 0.3);
  REQUIRE(terms.size() == 8);
  CHECK(std::abs(oracle::lse(terms) - oracle::exact_log_joint(c.params, 0.3, c.data.X, c.data.y)) < 1e-9);
}

TEST_CASE("omp kernels agree with the serial reference") {
  const auto c = make_case(3, 1500, 4, 7);
  const Matrix& X = c.data.X;
  for (int threads : {1, 2, 3}) {
    omp_set_num_threads(threads);
    Matrix a, b;
    ks::serial::expected_log_emission(X, c.params, c.phi, a);
    ks::omp::expected_log_emission(X, c.params, c.phi, b);
    CHECK(a == b);  // row-wise kernels are bit identical
    ks::serial::blended_log_emission(X, c.params, c.phi, a);
    ks::omp::blended_log_emission(X, c.params, c.phi, b);
    CHECK(a == b);

    Matrix ra, rb;
    Vector la, lb;
    ks::serial::normalize_rows(a, ra, la);
    ks::omp::normalize_rows(a, rb, lb);
    CHECK(ra == rb);
    CHECK(la == lb);

    const Vector ga = ks::serial::switch_gap(X, c.params, c.resp);
    const Vector gb = ks::omp::switch_gap(X, c.params, c.resp);
    CHECK((ga - gb).cwiseAbs().maxCoeff() < 1e-9);

    const auto wa = ks::serial::weighted_moments(X, c.resp);
    const auto wb = ks::omp::weighted_moments(X, c.resp);
    CHECK((wa.mean - wb.mean).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((wa.var - wb.var).cwiseAbs().maxCoeff() < 1e-12);

    const auto ca = ks::serial::column_moments(X);
    const auto cb = ks::omp::column_moments(X);
    CHECK((ca.var - cb.var).cwiseAbs().maxCoeff() < 1e-12);

    const auto sa = ks::serial::switch_config_log_joint(X.topRows(300), std::span(c.data.y).first(300), c.params, 0.4);
    const auto sb = ks::omp::switch_config_log_joint(X.topRows(300), std::span(c.data.y).first(300), c.params, 0.4);
    for (std::size_t i = 0; i < sa.size(); ++i) CHECK(std::abs(sa[i] - sb[i]) < 1e-8);
  }
  omp_set_num_threads(omp_get_num_procs());
}

TEST_CASE("omp reductions do not depend on the thread count") {
  const auto c = make_case(4, 2000, 3, 5);
  omp_set_num_threads(1);
  const Vector g1 = ks::omp::switch_gap(c.data.X, c.params, c.resp);
  const auto w1 = ks::omp::weighted_moments(c.data.X, c.resp);
  omp_set_num_threads(4);
  const Vector g4 = ks::omp::switch_gap(c.data.X, c.params, c.resp);
  const auto w4 = ks::omp::weighted_moments(c.data.X, c.resp);
  CHECK(g1 == g4);
  CHECK(w1.mean == w4.mean);
  CHECK(w1.var == w4.var);
  omp_set_num_threads(omp_get_num_procs());
}
