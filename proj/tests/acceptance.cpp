// End-to-end acceptance checks. One PASS/FAIL line per criterion; the exit
// status is nonzero when any criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "pfmix/datagen.hpp"
#include "pfmix/eval.hpp"

using namespace pfmix;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Every model that gets scored is also checked for log p(x,y) = log p(x) + log p(y|x).
double worst_identity_gap = 0.0;
int identity_models = 0;

template <class Data>
double score(const Model& m, const Data& test) {
  const auto logs = heldout_log_terms(m, test);
  if (logs.has_px) {
    worst_identity_gap =
        std::max(worst_identity_gap, ((logs.log_px + logs.log_py_given_x) - logs.log_pxy).cwiseAbs().maxCoeff());
    ++identity_models;
  }
  return multiclass_auroc(predict_proba(m, test), test.y);
}

FitOptions options(int K, std::uint64_t seed, double p = 1.0) {
  FitOptions o;
  o.em.K = K;
  o.em.seed = seed;
  o.em.p = p;
  return o;
}

bool monotone(const std::vector<double>& t) {
  for (std::size_t i = 1; i < t.size(); ++i)
    if (t[i] < t[i - 1] - 1e-8) return false;
  return true;
}

// ---- 1 ----
Outcome equivalence() {
  const auto train = gen_analysis_dataset(2000, 6.0, 100).data;
  const auto test = gen_analysis_dataset(2000, 6.0, 200).data;
  const auto pf = fit_model(ModelKind::pf_gmm, train, options(4, 0, 1.0));
  const auto sup = fit_model(ModelKind::sup_gmm, train, options(4, 0));
  double diff = pf.elbo_trace.size() == sup.elbo_trace.size() ? 0.0 : INFINITY;
  for (std::size_t i = 0; std::isfinite(diff) && i < pf.elbo_trace.size(); ++i)
    diff = std::max(diff, std::abs(pf.elbo_trace[i] - sup.elbo_trace[i]));
  const double a = score(pf, test), b = score(sup, test);
  return {diff <= 1e-9 && a >= 0.97 && b >= 0.97,
          fmt("max trace diff %.3g, AUROC pf %.4f sup %.4f", diff, a, b)};
}

// ---- 2, 3, 4 share the analysis fits ----
struct AnalysisSeed {
  double pf = 0, sup = 0, two = 0, p = 0;
  Vector phi;
  std::vector<double> curve;  // test AUROC per grid value, fit on all of train
};

std::vector<AnalysisSeed> analysis_runs;

void run_analysis() {
  const auto grid = default_p_grid();
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto train = gen_analysis_dataset(2000, 6.0, 100 + seed).data;
    const auto test = gen_analysis_dataset(2000, 6.0, 200 + seed).data;
    AnalysisSeed r;
    const auto t = tune_p(ModelKind::pf_gmm, train, grid, options(2, seed), 0.2, seed);
    r.p = t.p;
    r.pf = score(t.model, test);
    r.phi = t.model.switches()->values();
    r.sup = score(fit_model(ModelKind::sup_gmm, train, options(2, seed)), test);
    r.two = score(fit_model(ModelKind::two_step_gmm, train, options(2, seed)), test);
    for (double p : grid) r.curve.push_back(score(fit_model(ModelKind::pf_gmm, train, options(2, seed, p)), test));
    analysis_runs.push_back(std::move(r));
  }
}

Outcome misspecification() {
  run_analysis();
  int wins = 0;
  std::string d;
  for (const auto& r : analysis_runs) {
    wins += r.pf >= 0.95 && r.sup <= 0.65 && r.two <= 0.65;
    d += fmt("[p=%.2f pf %.3f sup %.3f 2step %.3f] ", r.p, r.pf, r.sup, r.two);
  }
  return {wins >= 3, fmt("%d/4 seeds: ", wins) + d};
}

Outcome switch_recovery_check() {
  int ok = 0, winners = 0;
  std::string d;
  for (const auto& r : analysis_runs) {
    if (!(r.pf >= 0.95 && r.sup <= 0.65 && r.two <= 0.65)) continue;
    ++winners;
    double worst_irrel = 0;
    for (int j = 1; j < 5; ++j) worst_irrel = std::max(worst_irrel, r.phi(j));
    ok += r.phi(0) >= 0.9 && worst_irrel <= 0.1;
    d += fmt("[phi0 %.3f max irrelevant %.3f] ", r.phi(0), worst_irrel);
  }
  return {winners > 0 && ok == winners, fmt("%d/%d winning fits: ", ok, winners) + d};
}

Outcome p_sweep_shape() {
  const auto grid = default_p_grid();
  std::vector<double> mean(grid.size(), 0.0);
  for (const auto& r : analysis_runs)
    for (std::size_t i = 0; i < grid.size(); ++i) mean[i] += r.curve[i] / static_cast<double>(analysis_runs.size());
  std::size_t best = 0;
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (mean[i] > mean[best]) best = i;
  const bool interior = best > 0 && best + 1 < grid.size();
  const bool pass = interior && mean[best] >= mean.front() + 0.05 && mean[best] >= mean.back() + 0.05;
  std::string d = "mean AUROC by p:";
  for (std::size_t i = 0; i < grid.size(); ++i) d += fmt(" %.2f:%.3f", grid[i], mean[i]);
  return {pass, d};
}

// ---- 5 ----
Outcome limitation() {
  std::vector<double> gaps;
  std::string d;
  for (double mu : {6.0, 12.0, 30.0}) {
    const auto data = gen_analysis_dataset(500, mu, 7).data;
    const double signal = exact_log_joint(analysis_reference_params(mu, true), 1.0, data.X, data.y);
    const double noise = exact_log_joint(analysis_reference_params(mu, false), 1.0, data.X, data.y);
    gaps.push_back(noise - signal);
    d += fmt("mu=%g: %.2f ", mu, noise - signal);
  }
  return {gaps[0] < gaps[1] && gaps[1] < gaps[2] && gaps[2] > 0, "log joint(noise) - log joint(signal): " + d};
}

// ---- 6 ----
Outcome monotonicity() {
  std::mt19937_64 g(2024);
  const auto grid = default_p_grid();
  int bad = 0;
  std::size_t steps = 0;
  for (int run = 0; run < 50; ++run) {
    const int K = 1 + static_cast<int>(g() % 5), D = 2 + static_cast<int>(g() % 9);
    EmConfig cfg;
    cfg.K = K;
    cfg.p = grid[g() % grid.size()];
    cfg.seed = g();
    cfg.n_restarts = 2;
    cfg.max_iters = 200;
    std::vector<double> trace;
    if (run % 2 == 0) {
      GmmSweepSpec spec;
      spec.K_true = 3;
      spec.D = D;
      spec.D_rel = 1 + static_cast<int>(g() % static_cast<unsigned>(D));
      spec.seed = cfg.seed;
      trace = fit(gen_gmm_sweep(spec, 300).data, cfg).elbo_trace;
    } else {
      HmmSweepSpec spec;
      spec.D = D;
      spec.D_rel = 1 + static_cast<int>(g() % static_cast<unsigned>(D));
      spec.seed = cfg.seed;
      trace = hmm_fit(gen_hmm_sweep(spec, 15, 12).data, cfg).elbo_trace;
    }
    bad += !monotone(trace);
    steps += trace.size();
  }
  return {bad == 0, fmt("%d/50 runs with a decrease beyond 1e-8 (%zu traced steps)", bad, steps)};
}

// ---- 7 ----
Outcome bound_validity() {
  std::mt19937_64 g(77);
  double worst_elbo = -INFINITY, worst_alt = -INFINITY;
  for (int rep = 0; rep < 20; ++rep) {
    const int D = 1 + rep % 8, K = 1 + rep % 3;
    const auto data = oracle::random_data(g, 25, D, 2);
    EmConfig cfg;
    cfg.K = K;
    cfg.p = 0.05 + 0.045 * rep;
    cfg.seed = static_cast<std::uint64_t>(rep);
    cfg.n_restarts = 1;
    cfg.max_iters = 30;
    const auto f = fit(data, cfg);
    const double exact = oracle::exact_log_joint(f.params, cfg.p, data.X, data.y);
    worst_elbo = std::max(worst_elbo, elbo(f.params, f.phi, data.X, data.y, cfg.p) - exact);
    worst_alt = std::max(worst_alt, alt_bound_objective(f.params, cfg.p, data.X, data.y) - exact);
  }
  return {worst_elbo <= 1e-9 && worst_alt <= 1e-9,
          fmt("max(elbo - exact) %.3g, max(alt bound - exact) %.3g", worst_elbo, worst_alt)};
}

// ---- 8 ----
Outcome forward_backward_oracle() {
  std::mt19937_64 g(8);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const int K = 1 + rep % 3, T = 1 + (rep / 3) % 5, D = 1 + rep % 4;
    HmmParams hp;
    hp.gmm = oracle::random_params(g, K, D, 2);
    hp.A = oracle::random_transitions(g, K);
    const auto seq = oracle::random_data(g, T, D, 2);
    const Vector phi = oracle::random_phi(g, D);
    const auto fb = forward_backward(hp, SwitchPosterior(phi), seq.X, seq.y, true);
    const auto ref = oracle::enumerate_paths(hp, phi, seq.X, seq.y);
    worst = std::max(worst, std::abs(fb.loglik - ref.loglik));
    worst = std::max(worst, (fb.gamma - ref.gamma).cwiseAbs().maxCoeff());
    for (std::size_t t = 0; t < fb.edge.size(); ++t)
      worst = std::max(worst, (fb.edge[t] - ref.edge[t]).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-10, fmt("max abs deviation %.3g over 100 chains", worst)};
}

// ---- 9 ----
Outcome noise_robustness() {
  const auto grid = default_p_grid();
  int good = 0;
  std::string d;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    bool ok = true;
    d += fmt("seed %llu [", static_cast<unsigned long long>(seed));
    for (int drel : {3, 6, 15}) {
      GmmSweepSpec spec;
      spec.K_true = 4;
      spec.D = 30;
      spec.D_rel = drel;
      spec.seed = seed;
      const auto all = gen_gmm_sweep(spec, 4000);
      const auto [train, test] = split(all.data, 0.75, seed);
      const auto t = tune_p(ModelKind::pf_gmm, train, grid, options(2, seed), 0.2, seed);
      const double pf = score(t.model, test);
      const double sup = score(fit_model(ModelKind::sup_gmm, train, options(2, seed)), test);
      ok = ok && pf >= sup && (drel != 3 || pf >= sup + 0.05);
      d += fmt(" D_rel=%d pf %.3f sup %.3f", drel, pf, sup);
    }
    d += "] ";
    good += ok;
  }
  return {good >= 3, fmt("%d/4 seeds: ", good) + d};
}

// ---- 10 ----
Outcome hmm_comparison() {
  const auto grid = default_p_grid();
  int good = 0;
  std::string d;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    HmmSweepSpec spec;
    spec.seed = seed;
    const auto all = gen_hmm_sweep(spec, 200, 30);
    const auto [train, test] = split(all.data, 0.5, seed);
    d += fmt("seed %llu [", static_cast<unsigned long long>(seed));
    for (int K : {2, 4}) {
      const auto t = tune_p(ModelKind::pf_hmm, train, grid, options(K, seed), 0.2, seed);
      const double pf = score(t.model, test);
      const double sup = score(fit_model(ModelKind::sup_hmm, train, options(K, seed)), test);
      if (K == 2) good += pf >= sup + 0.05;
      d += fmt(" K=%d pf %.3f sup %.3f", K, pf, sup);
    }
    d += "] ";
  }
  return {good >= 3, fmt("%d/4 seeds at budget 2: ", good) + d};
}

// ---- 11 ----
Outcome metric_identities() {
  std::mt19937_64 g(11);
  int mismatches = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const int n = 2 + static_cast<int>(g() % 60);
    std::vector<double> s(static_cast<std::size_t>(n));
    std::vector<int> y(static_cast<std::size_t>(n));
    const unsigned levels = rep % 3 == 0 ? 3u : 1000000u;
    for (int i = 0; i < n; ++i) {
      s[static_cast<std::size_t>(i)] = static_cast<double>(g() % levels) / 7.0;
      y[static_cast<std::size_t>(i)] = static_cast<int>(g() % 2);
    }
    y[0] = 0;
    y[1] = 1;
    mismatches += auroc(s, y) != oracle::pairwise_auroc(s, y);
  }
  return {mismatches == 0 && identity_models > 0 && worst_identity_gap <= 1e-10,
          fmt("identity gap %.3g over %d models; %d/1000 AUROC mismatches", worst_identity_gap, identity_models,
              mismatches)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all{
      {1, "no-misspecification equivalence", 30, equivalence},
      {2, "misspecification win", 300, misspecification},
      {3, "switch recovery", 1e9, switch_recovery_check},
      {4, "p-sweep shape", 1e9, p_sweep_shape},
      {5, "limitation theorem", 60, limitation},
      {6, "ELBO monotonicity", 1e9, monotonicity},
      {7, "bound validity", 1e9, bound_validity},
      {8, "forward-backward oracle", 1e9, forward_backward_oracle},
      {9, "noise-robustness sweep", 600, noise_robustness},
      {10, "pf-HMM vs sup-HMM", 900, hmm_comparison},
      {11, "metric identities", 1e9, metric_identities},
  };
  int failed = 0;
  for (const auto& c : all) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.budget_s) {
      o.pass = false;
      o.detail += fmt(" (over the %.0f s budget)", c.budget_s);
    }
    failed += !o.pass;
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(all.size()) - failed, all.size());
  return failed == 0 ? 0 : 1;
}
