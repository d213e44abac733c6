// Serial reference vs OpenMP kernels on sweep-sized data.
#include <benchmark/benchmark.h>

#include <map>

#include "pfmix/datagen.hpp"
#include "pfmix/kernels.hpp"
#include "pfmix/pf_gmm.hpp"

namespace {

using namespace pfmix;

struct Fixture {
  Matrix X;
  GmmParams params;
  Vector phi;
  Matrix resp;
};

const Fixture& fixture(std::size_t n) {
  static std::map<std::size_t, Fixture> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  GmmSweepSpec spec;
  spec.D = 100;
  spec.D_rel = 10;
  auto g = gen_gmm_sweep(spec, n);
  EmConfig cfg;
  cfg.K = 10;
  Fixture f;
  f.X = g.data.X;
  f.params = init_params(g.data, cfg, 1);
  f.phi = Vector::Constant(f.X.cols(), 0.3);
  Vector lse;
  Matrix scores;
  kernels::serial::expected_log_emission(f.X, f.params, f.phi, scores);
  kernels::serial::normalize_rows(scores, f.resp, lse);
  return cache.emplace(n, std::move(f)).first->second;
}

template <Backend B>
void BM_expected_log_emission(benchmark::State& st) {
  const auto& f = fixture(static_cast<std::size_t>(st.range(0)));
  Matrix out;
  for (auto _ : st) {
    kernels::expected_log_emission(f.X, f.params, f.phi, out, B);
    benchmark::DoNotOptimize(out.data());
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

template <Backend B>
void BM_switch_gap(benchmark::State& st) {
  const auto& f = fixture(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(kernels::switch_gap(f.X, f.params, f.resp, B));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

template <Backend B>
void BM_weighted_moments(benchmark::State& st) {
  const auto& f = fixture(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(kernels::weighted_moments(f.X, f.resp, B));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

template <Backend B>
void BM_fit(benchmark::State& st) {
  GmmSweepSpec spec;
  spec.D = 30;
  spec.D_rel = 3;
  spec.K_true = 4;
  const auto g = gen_gmm_sweep(spec, static_cast<std::size_t>(st.range(0)));
  EmConfig cfg;
  cfg.K = 2;
  cfg.p = 0.1;
  cfg.n_restarts = 1;
  cfg.max_iters = 50;
  cfg.backend = B;
  for (auto _ : st) benchmark::DoNotOptimize(fit(g.data, cfg).elbo_trace.back());
}

}  // namespace

BENCHMARK(BM_expected_log_emission<Backend::serial>)->Arg(4000)->Arg(32000);
BENCHMARK(BM_expected_log_emission<Backend::parallel>)->Arg(4000)->Arg(32000);
BENCHMARK(BM_switch_gap<Backend::serial>)->Arg(4000)->Arg(32000);
BENCHMARK(BM_switch_gap<Backend::parallel>)->Arg(4000)->Arg(32000);
BENCHMARK(BM_weighted_moments<Backend::serial>)->Arg(4000)->Arg(32000);
BENCHMARK(BM_weighted_moments<Backend::parallel>)->Arg(4000)->Arg(32000);
BENCHMARK(BM_fit<Backend::serial>)->Arg(3000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_fit<Backend::parallel>)->Arg(3000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
