#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "config.hpp"
#include "pfmix/cli.hpp"
#include "pfmix/csv_io.hpp"
#include "pfmix/datagen.hpp"
#include "pfmix/eval.hpp"
#include "pfmix/model_io.hpp"

namespace pfmix {

namespace fs = std::filesystem;
using nlohmann::json;
using cli::ExperimentConfig;

namespace {

constexpr const char* kNA = "NA";

struct Command {
  std::string name;
  std::vector<std::string_view> keys;
  std::string config_path;
  std::map<std::string, std::string> flags;  // key -> raw text, only when given
};

// Run directory bookkeeping: every written file is listed in manifest.json.
class RunDir {
 public:
  explicit RunDir(fs::path root) : root_(std::move(root)) {
    std::error_code ec;
    fs::create_directories(root_, ec);
    if (ec || !fs::is_directory(root_)) throw IoError("cannot create output directory " + root_.string());
  }

  fs::path path(const std::string& name) const { return root_ / name; }

  void write_text(const std::string& name, const std::string& text) {
    std::ofstream out(path(name), std::ios::binary);
    if (!out) throw IoError("cannot write " + path(name).string());
    out << text;
    if (!out) throw IoError("write failed: " + path(name).string());
    record(name, text);
  }

  void record_file(const std::string& name) { record(name, slurp(path(name))); }

  void write_manifest(const std::string& command, const ExperimentConfig& cfg) {
    json m{{"command", command},
           {"library_version", PFMIX_VERSION},
           {"config", cfg.provenance()},
           {"config_digest", cfg.digest()},
           {"files", files_}};
    std::ofstream out(path("manifest.json"), std::ios::binary);
    if (!out) throw IoError("cannot write " + path("manifest.json").string());
    out << m.dump(1) << '\n';
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

 private:
  void record(const std::string& name, const std::string& bytes) {
    files_.push_back({{"name", name}, {"bytes", bytes.size()}, {"fnv1a64", hex_digest(bytes)}});
  }

  fs::path root_;
  json files_ = json::array();
};

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string csv_cell(const std::optional<double>& v) { return v ? format_double(*v) : kNA; }

ExperimentConfig load_config(const Command& c) {
  ExperimentConfig cfg;
  if (!c.config_path.empty()) cfg.merge_file(c.config_path);
  for (const auto& [key, text] : c.flags) {
    for (const auto& k : cli::config_keys())
      if (k.name == key) cfg.set(key, cli::parse_value(k, text));
  }
  return cfg;
}

FitOptions fit_options(const ExperimentConfig& cfg, int K, std::uint64_t seed) {
  FitOptions o;
  o.em.K = K;
  o.em.seed = seed;
  o.em.n_restarts = static_cast<int>(cfg.integer("n_restarts"));
  o.em.max_iters = static_cast<int>(cfg.integer("max_iters"));
  o.em.rel_tol = cfg.real("rel_tol");
  o.em.alpha = cfg.real("alpha");
  if (auto p = cfg.maybe_real("p")) o.em.p = *p;
  o.logreg.l2 = cfg.real("l2");
  return o;
}

double fraction(const ExperimentConfig& cfg, std::string_view key) {
  const double f = cfg.real(key);
  if (!(f > 0.0 && f < 1.0)) throw UsageError("--" + cli::flag_name(key) + " must be in (0, 1)");
  return f;
}

std::size_t positive(const ExperimentConfig& cfg, std::string_view key) {
  const long long v = cfg.integer(key);
  if (v < 1) throw UsageError("--" + cli::flag_name(key) + " must be positive");
  return static_cast<std::size_t>(v);
}

// ---- simulate -------------------------------------------------------------

std::vector<int> gather(const std::vector<int>& v, std::span<const std::size_t> rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(v[r]);
  return out;
}

std::vector<int> gather_steps(const std::vector<int>& v, const SequenceDataset& data, std::span<const std::size_t> seqs) {
  std::vector<int> out;
  for (auto s : seqs)
    for (std::size_t i = data.offsets[s]; i < data.offsets[s + 1]; ++i) out.push_back(v[i]);
  return out;
}

json simulate_truth_common(const ExperimentConfig& cfg, const GroundTruth& truth) {
  return json{{"dataset", cfg.str("dataset")}, {"seed", cfg.u64("seed")}, {"relevant", truth.relevant}};
}

int cmd_simulate(const ExperimentConfig& cfg, std::ostream& out) {
  RunDir run(cfg.str("out"));
  const std::string kind = cfg.str("dataset");
  const std::uint64_t seed = cfg.u64("seed");
  const std::size_t n = positive(cfg, "n");
  const double train_fraction = 1.0 - fraction(cfg, "test_fraction");
  if (n < 2) throw UsageError("--n must be at least 2 to form a train/test split");
  const auto [tr, te] = split_indices(n, train_fraction, seed);

  json truth;
  if (kind == "analysis" || kind == "gmm-sweep") {
    GeneratedData g;
    if (kind == "analysis") {
      const double mu = cfg.real("mu");
      g = gen_analysis_dataset(n, mu, seed);
      truth = simulate_truth_common(cfg, g.truth);
      truth["generator"] = {{"mu", mu}};
    } else {
      GmmSweepSpec spec;
      if (cfg.has("k_true")) spec.K_true = static_cast<int>(cfg.integer("k_true"));
      if (cfg.has("dims")) spec.D = static_cast<int>(cfg.integer("dims"));
      if (cfg.has("d_rel")) spec.D_rel = static_cast<int>(cfg.integer("d_rel"));
      spec.gap = cfg.real("gap");
      spec.seed = seed;
      spec.validate();
      g = gen_gmm_sweep(spec, n);
      const auto t = gmm_sweep_truth(spec);
      truth = simulate_truth_common(cfg, g.truth);
      truth["generator"] = {{"k_true", spec.K_true},
                            {"dims", spec.D},
                            {"d_rel", spec.D_rel},
                            {"gap", spec.gap},
                            {"theta_rel", vector_to_json(t.theta_rel)},
                            {"theta_irrel", vector_to_json(t.theta_irrel)},
                            {"label_prob", t.label_prob}};
    }
    truth["train"] = {{"component", gather(g.truth.component, tr)},
                      {"irrelevant_component", gather(g.truth.irrelevant_component, tr)}};
    truth["test"] = {{"component", gather(g.truth.component, te)},
                     {"irrelevant_component", gather(g.truth.irrelevant_component, te)}};
    save_csv(run.path("train.csv"), subset(g.data, tr));
    save_csv(run.path("test.csv"), subset(g.data, te));
  } else if (kind == "hmm-sweep") {
    HmmSweepSpec spec;
    if (cfg.has("k_true")) spec.K_true = static_cast<int>(cfg.integer("k_true"));
    if (cfg.has("dims")) spec.D = static_cast<int>(cfg.integer("dims"));
    if (cfg.has("d_rel")) spec.D_rel = static_cast<int>(cfg.integer("d_rel"));
    if (cfg.has("label_prob")) spec.label_prob = cfg.reals("label_prob");
    spec.seed = seed;
    spec.validate();
    const std::size_t T = positive(cfg, "seq_len");
    const auto g = gen_hmm_sweep(spec, n, T);
    const auto t = hmm_sweep_truth(spec);
    truth = simulate_truth_common(cfg, g.truth);
    truth["generator"] = {{"k_true", spec.K_true},          {"dims", spec.D},
                          {"d_rel", spec.D_rel},            {"seq_len", T},
                          {"label_prob", spec.label_prob},  {"theta", vector_to_json(t.theta)},
                          {"A_rel", matrix_to_json(t.A_rel)}, {"A_irrel", matrix_to_json(t.A_irrel)}};
    truth["train"] = {{"component", gather_steps(g.truth.component, g.data, tr)},
                      {"irrelevant_component", gather_steps(g.truth.irrelevant_component, g.data, tr)}};
    truth["test"] = {{"component", gather_steps(g.truth.component, g.data, te)},
                     {"irrelevant_component", gather_steps(g.truth.irrelevant_component, g.data, te)}};
    save_csv(run.path("train.csv"), subset(g.data, tr));
    save_csv(run.path("test.csv"), subset(g.data, te));
  } else {
    throw UsageError("unknown --dataset '" + kind + "' (expected analysis, gmm-sweep or hmm-sweep)");
  }
  run.record_file("train.csv");
  run.record_file("test.csv");
  run.write_text("truth.json", truth.dump(1) + "\n");
  run.write_manifest("simulate", cfg);
  out << "wrote " << run.path("train.csv").string() << ", " << run.path("test.csv").string() << ", "
      << run.path("truth.json").string() << '\n';
  return 0;
}

// ---- shared loading -------------------------------------------------------

struct AnyData {
  bool sequences = false;
  Dataset flat;
  SequenceDataset seq;
};

AnyData load_data(const std::string& path) {
  AnyData d;
  d.sequences = is_sequence_csv(path);
  if (d.sequences)
    d.seq = load_sequence_csv(path);
  else
    d.flat = load_dataset_csv(path);
  return d;
}

std::vector<int> load_mask(const ExperimentConfig& cfg) {
  if (!cfg.has("truth")) return {};
  json doc;
  try {
    doc = json::parse(RunDir::slurp(cfg.str("truth")));
    return doc.at("relevant").get<std::vector<int>>();
  } catch (const json::exception& e) {
    throw DataError(cfg.str("truth") + ": " + e.what());
  }
}

// Switch recovery is undefined for an all-relevant or all-irrelevant mask.
std::span<const int> usable_mask(const std::vector<int>& mask, std::size_t dims) {
  if (mask.size() != dims) return {};
  bool zero = false, one = false;
  for (int v : mask) (v ? one : zero) = true;
  if (!zero || !one) return {};
  return mask;
}

void check_compatible(const Model& m, const AnyData& d, const std::string& what) {
  const std::size_t dims = d.sequences ? d.seq.dims() : d.flat.dims();
  if (dims != m.dims())
    throw DataError(what + " has " + std::to_string(dims) + " input columns but the model expects " +
                    std::to_string(m.dims()));
  if (is_sequence_kind(m.kind) && !d.sequences)
    throw DataError(what + " is flat data but a " + std::string(to_string(m.kind)) + " model needs sequences");
  const auto& y = d.sequences ? d.seq.y : d.flat.y;
  if (y.empty()) throw DataError(what + " has no y column");
  for (int v : y)
    if (static_cast<std::size_t>(v) >= m.classes())
      throw DataError(what + ": label " + std::to_string(v) + " is out of range for a " +
                      std::to_string(m.classes()) + "-class model");
}

MetricsReport metrics(const Model& m, const AnyData& d, std::span<const int> mask) {
  return d.sequences ? heldout_metrics(m, d.seq, mask) : heldout_metrics(m, d.flat, mask);
}

json metrics_json(const MetricsReport& r) {
  return json{{"model_id", r.model_id},
              {"seed", r.seed},
              {"p", r.p},
              {"K", r.K},
              {"auroc", r.auroc},
              {"heldout_log_px", r.heldout_log_px ? json(*r.heldout_log_px) : json("not-applicable")},
              {"heldout_log_py_given_x", r.heldout_log_py_given_x},
              {"switch_auroc", optional_number(r.switch_auroc)}};
}

ModelKind single_kind(const ExperimentConfig& cfg) {
  const auto kinds = cfg.strs("model");
  if (kinds.size() != 1) throw UsageError("fit takes exactly one --model");
  return parse_model_kind(kinds.front());
}

std::vector<double> p_grid(const ExperimentConfig& cfg) {
  auto g = cfg.reals("p_grid");
  if (g.empty()) throw UsageError("--p-grid is empty");
  for (double p : g)
    if (!(p >= 0.0 && p <= 1.0)) throw UsageError("--p-grid values must lie in [0, 1]");
  return g;
}

struct Fitted {
  Model model;
  std::optional<PTuning> tuning;
};

// pf kinds need p or a grid; other kinds ignore both.
Fitted fit_one(ModelKind kind, const AnyData& train, const ExperimentConfig& cfg, int K, std::uint64_t seed) {
  const auto opt = fit_options(cfg, K, seed);
  if (uses_switch_prior(kind) && cfg.has("p_grid")) {
    const auto grid = p_grid(cfg);
    const double vf = fraction(cfg, "val_fraction");
    PTuning t = train.sequences ? tune_p(kind, train.seq, grid, opt, vf, seed)
                                : tune_p(kind, train.flat, grid, opt, vf, seed);
    Model m = t.model;
    return {std::move(m), std::move(t)};
  }
  if (uses_switch_prior(kind) && !cfg.has("p"))
    throw UsageError(std::string(to_string(kind)) + " needs a switch prior: pass --p <value> or --p-grid <list>");
  return {train.sequences ? fit_model(kind, train.seq, opt) : fit_model(kind, train.flat, opt), std::nullopt};
}

// ---- fit ------------------------------------------------------------------

int cmd_fit(const ExperimentConfig& cfg, std::ostream& out) {
  const ModelKind kind = single_kind(cfg);
  const int K = static_cast<int>(cfg.integer("K"));
  const std::uint64_t seed = cfg.u64("seed");
  const AnyData train = load_data(cfg.str("train"));
  if (is_sequence_kind(kind) && !train.sequences)
    throw DataError(cfg.str("train") + " is flat data but " + std::string(to_string(kind)) + " needs sequences");
  RunDir run(cfg.str("out"));

  const auto t0 = std::chrono::steady_clock::now();
  Fitted f = fit_one(kind, train, cfg, K, seed);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  save_model(run.path("model.json"), f.model);
  run.record_file("model.json");

  json report{{"model", std::string(to_string(kind))},
              {"K", K},
              {"seed", seed},
              {"p", f.model.p},
              {"converged", f.model.converged},
              {"iterations", f.model.iterations},
              {"elbo_trace", f.model.elbo_trace},
              {"wall_time_s", wall},
              {"train", cfg.str("train")},
              {"config_digest", cfg.digest()},
              {"library_version", PFMIX_VERSION},
              {"model_digest", hex_digest(RunDir::slurp(run.path("model.json")))}};
  if (f.tuning) {
    report["p_selection"] = {{"grid", f.tuning->grid},
                             {"val_auroc", f.tuning->val_auroc},
                             {"selected_p", f.tuning->p},
                             {"val_fraction", cfg.real("val_fraction")}};
  }
  if (cfg.has("test")) {
    const AnyData test = load_data(cfg.str("test"));
    check_compatible(f.model, test, cfg.str("test"));
    const auto mask = load_mask(cfg);
    report["test_metrics"] = metrics_json(metrics(f.model, test, usable_mask(mask, f.model.dims())));
  }
  run.write_text("report.json", report.dump(1) + "\n");
  run.write_manifest("fit", cfg);
  out << "fitted " << to_string(kind) << " (K=" << K << ", p=" << format_double(f.model.p) << ") -> "
      << run.path("model.json").string() << '\n';
  return 0;
}

// ---- sweep ----------------------------------------------------------------

struct SweepRow {
  std::string model;
  int K = 0;
  std::optional<double> p;
  std::uint64_t seed = 0;
  bool selected = true;
  std::optional<double> val_auroc;
  std::optional<double> auroc, log_px, log_pyx, switch_auroc, final_elbo;
  std::string status = "ok";
};

std::optional<double> last_elbo(const Model& m) {
  if (m.elbo_trace.empty()) return std::nullopt;
  return m.elbo_trace.back();
}

SweepRow row_from(const Model& m, const AnyData& test, std::span<const int> mask) {
  const auto r = metrics(m, test, mask);
  SweepRow row;
  row.model = std::string(to_string(m.kind));
  row.K = m.K;
  if (m.kind != ModelKind::logreg) row.p = m.p;
  row.seed = m.seed;
  row.auroc = r.auroc;
  row.log_px = r.heldout_log_px;
  row.log_pyx = r.heldout_log_py_given_x;
  row.switch_auroc = r.switch_auroc;
  row.final_elbo = last_elbo(m);
  return row;
}

std::vector<SweepRow> sweep_cell(ModelKind kind, int K, std::uint64_t seed, const AnyData& train,
                                 const AnyData& test, const ExperimentConfig& cfg, const std::vector<int>& mask) {
  Fitted f = fit_one(kind, train, cfg, K, seed);
  check_compatible(f.model, test, cfg.str("test"));
  const auto m = usable_mask(mask, f.model.dims());
  std::vector<SweepRow> rows;
  if (!f.tuning) {
    rows.push_back(row_from(f.model, test, m));
    return rows;
  }
  for (std::size_t i = 0; i < f.tuning->fits.size(); ++i) {
    SweepRow r = row_from(f.tuning->fits[i], test, m);
    r.val_auroc = f.tuning->val_auroc[i];
    r.selected = i == f.tuning->best_index;
    rows.push_back(std::move(r));
  }
  return rows;
}

int cmd_sweep(const ExperimentConfig& cfg, std::ostream& out) {
  std::vector<ModelKind> kinds;
  for (const auto& s : cfg.strs("model")) kinds.push_back(parse_model_kind(s));
  if (kinds.empty()) throw UsageError("--model is empty");
  std::vector<int> Ks;
  if (cfg.has("K_grid")) {
    for (auto k : cfg.integers("K_grid")) Ks.push_back(static_cast<int>(k));
    if (Ks.empty()) throw UsageError("--K-grid is empty");
  } else {
    Ks.push_back(static_cast<int>(cfg.integer("K")));
  }
  std::vector<std::uint64_t> seeds = cfg.has("seeds") ? cfg.u64s("seeds") : std::vector{cfg.u64("seed")};
  if (seeds.empty()) throw UsageError("--seeds is empty");
  if (cfg.has("p_grid")) p_grid(cfg);
  for (auto k : kinds)
    if (uses_switch_prior(k) && !cfg.has("p") && !cfg.has("p_grid"))
      throw UsageError(std::string(to_string(k)) + " needs a switch prior: pass --p <value> or --p-grid <list>");

  const AnyData train = load_data(cfg.str("train"));
  const AnyData test = load_data(cfg.str("test"));
  if (train.sequences != test.sequences) throw DataError("train and test must both be flat or both be sequences");
  const auto mask = load_mask(cfg);
  RunDir run(cfg.str("out"));

  struct Cell {
    ModelKind kind;
    int K;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (auto kind : kinds)
    for (int K : Ks)
      for (auto s : seeds) cells.push_back({kind, K, s});

  std::vector<std::vector<SweepRow>> results(cells.size());
  // Cells are independent jobs; kernels inside a cell run single threaded here.
  const int outer = omp_get_max_threads();
  omp_set_max_active_levels(1);
#pragma omp parallel for schedule(dynamic) num_threads(outer)
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    try {
      if (is_sequence_kind(c.kind) && !train.sequences)
        throw DataError(std::string(to_string(c.kind)) + " needs sequence data");
      results[i] = sweep_cell(c.kind, c.K, c.seed, train, test, cfg, mask);
    } catch (const std::exception& e) {
      SweepRow r;
      r.model = std::string(to_string(c.kind));
      r.K = c.K;
      r.seed = c.seed;
      if (uses_switch_prior(c.kind)) r.p = cfg.maybe_real("p");
      std::string msg = e.what();
      for (auto& ch : msg)
        if (ch == ',' || ch == '\n' || ch == '"') ch = ' ';
      r.status = "error: " + msg;
      results[i] = {r};
    }
  }

  std::ostringstream csv;
  csv << "model,K,p,seed,selected,val_auroc,auroc,heldout_log_px,heldout_log_py_given_x,switch_auroc,final_elbo,"
         "status\n";
  std::size_t failed = 0;
  for (const auto& cell : results)
    for (const auto& r : cell) {
      if (r.status != "ok") ++failed;
      csv << r.model << ',' << r.K << ',' << csv_cell(r.p) << ',' << r.seed << ',' << (r.selected ? 1 : 0) << ','
          << csv_cell(r.val_auroc) << ',' << csv_cell(r.auroc) << ',' << csv_cell(r.log_px) << ','
          << csv_cell(r.log_pyx) << ',' << csv_cell(r.switch_auroc) << ',' << csv_cell(r.final_elbo) << ','
          << r.status << '\n';
    }
  run.write_text("results.csv", csv.str());
  run.write_manifest("sweep", cfg);
  out << "swept " << cells.size() << " cells";
  if (failed) out << " (" << failed << " failed)";
  out << " -> " << run.path("results.csv").string() << '\n';
  return 0;
}

// ---- eval -----------------------------------------------------------------

int cmd_eval(const ExperimentConfig& cfg, std::ostream& out) {
  const std::string model_path = cfg.str("model_file");
  const Model model = load_model(model_path);
  const AnyData test = load_data(cfg.str("test"));
  check_compatible(model, test, cfg.str("test"));
  const auto mask = load_mask(cfg);
  RunDir run(cfg.str("out"));
  json report = metrics_json(metrics(model, test, usable_mask(mask, model.dims())));
  report["model"] = std::string(to_string(model.kind));
  report["model_file"] = model_path;
  report["model_digest"] = hex_digest(RunDir::slurp(model_path));
  report["test"] = cfg.str("test");
  report["test_digest"] = hex_digest(RunDir::slurp(cfg.str("test")));
  report["config_digest"] = cfg.digest();
  report["library_version"] = PFMIX_VERSION;
  run.write_text("report.json", report.dump(1) + "\n");
  run.write_manifest("eval", cfg);
  out << "auroc " << format_double(report["auroc"].get<double>()) << " -> " << run.path("report.json").string()
      << '\n';
  return 0;
}

void apply_worker_env() {
  const char* w = std::getenv("PFMIX_WORKERS");
  if (!w || !*w) return;
  char* end = nullptr;
  const long n = std::strtol(w, &end, 10);
  if (*end != '\0' || n < 1) throw UsageError("PFMIX_WORKERS must be a positive integer");
  omp_set_num_threads(static_cast<int>(n));
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"pfmix: prediction-focused mixtures and HMMs", "pfmix"};
  app.set_version_flag("--version", std::string(PFMIX_VERSION));
  app.require_subcommand(1);

  const std::vector<std::string_view> run_keys{"seed", "out"};
  const std::vector<std::string_view> em_keys{"n_restarts", "max_iters", "rel_tol", "alpha", "l2", "val_fraction"};
  auto keys_for = [&](std::initializer_list<std::string_view> extra, bool em) {
    std::vector<std::string_view> k(extra);
    k.insert(k.end(), run_keys.begin(), run_keys.end());
    if (em) k.insert(k.end(), em_keys.begin(), em_keys.end());
    return k;
  };

  std::vector<Command> commands{
      {"simulate",
       keys_for({"dataset", "n", "test_fraction", "seq_len", "mu", "k_true", "dims", "d_rel", "gap", "label_prob"},
                false),
       {},
       {}},
      {"fit", keys_for({"train", "test", "truth", "model", "K", "p", "p_grid"}, true), {}, {}},
      {"sweep", keys_for({"train", "test", "truth", "model", "K", "K_grid", "p", "p_grid", "seeds"}, true), {}, {}},
      {"eval", keys_for({"model_file", "test", "truth"}, false), {}, {}},
  };
  const std::map<std::string, std::string> about{
      {"simulate", "generate a synthetic dataset and split it into train.csv / test.csv"},
      {"fit", "fit one model and write model.json and report.json"},
      {"sweep", "fit a grid of models / budgets / seeds and write results.csv"},
      {"eval", "score a saved model on test data and write report.json"}};

  std::vector<std::map<std::string, std::string>> raw(commands.size());
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < commands.size(); ++i) {
    auto& c = commands[i];
    auto* sub = app.add_subcommand(c.name, about.at(c.name));
    sub->add_option("--config", c.config_path, "JSON configuration file; flags override it");
    for (auto key : c.keys) {
      const auto& spec = *std::find_if(cli::config_keys().begin(), cli::config_keys().end(),
                                       [&](const cli::KeySpec& k) { return k.name == key; });
      sub->add_option("--" + cli::flag_name(key), raw[i][std::string(key)], std::string(spec.help));
    }
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? 0 : 2;
  }

  try {
    apply_worker_env();
    for (std::size_t i = 0; i < commands.size(); ++i) {
      if (!subs[i]->parsed()) continue;
      auto& c = commands[i];
      for (auto key : c.keys) {
        const std::string k(key);
        if (subs[i]->count("--" + cli::flag_name(key)) > 0) c.flags[k] = raw[i][k];
      }
      const ExperimentConfig cfg = load_config(c);
      if (c.name == "simulate") return cmd_simulate(cfg, out);
      if (c.name == "fit") return cmd_fit(cfg, out);
      if (c.name == "sweep") return cmd_sweep(cfg, out);
      return cmd_eval(cfg, out);
    }
    return 2;
  } catch (const Error& e) {
    err << "pfmix: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    err << "pfmix: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace pfmix
