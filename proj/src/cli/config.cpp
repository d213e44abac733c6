#include "config.hpp"

#include <charconv>
#include <fstream>

#include "pfmix/common.hpp"
#include "pfmix/model_io.hpp"

namespace pfmix::cli {

using nlohmann::json;

const std::vector<KeySpec>& config_keys() {
  static const std::vector<KeySpec> keys{
      {"dataset", KeyType::str, "generator: analysis, gmm-sweep or hmm-sweep"},
      {"n", KeyType::integer, "items to generate (data points, or sequences for hmm-sweep)"},
      {"test_fraction", KeyType::real, "fraction of generated items written to test.csv"},
      {"seq_len", KeyType::integer, "sequence length for hmm-sweep"},
      {"mu", KeyType::real, "analysis data: distance between the noise cluster means"},
      {"k_true", KeyType::integer, "sweep data: components per block"},
      {"dims", KeyType::integer, "sweep data: total input dimensions"},
      {"d_rel", KeyType::integer, "sweep data: relevant dimensions"},
      {"gap", KeyType::real, "gmm-sweep: spacing of component means"},
      {"label_prob", KeyType::real_list, "hmm-sweep: P(y = 1 | state)"},
      {"train", KeyType::str, "training CSV"},
      {"test", KeyType::str, "test CSV"},
      {"truth", KeyType::str, "ground-truth JSON written by simulate (optional)"},
      {"model_file", KeyType::str, "model JSON written by fit"},
      {"model", KeyType::str_list, "model kind(s): pf-gmm, pf-hmm, sup-gmm, sup-hmm, 2step-gmm, 2step-hmm, logreg"},
      {"K", KeyType::integer, "component budget"},
      {"K_grid", KeyType::int_list, "component budgets for sweep"},
      {"p", KeyType::real, "switch prior"},
      {"p_grid", KeyType::real_list, "switch priors to select from on a validation split"},
      {"seed", KeyType::u64, "random seed"},
      {"seeds", KeyType::u64_list, "seeds for sweep"},
      {"val_fraction", KeyType::real, "validation share of train used to select p"},
      {"n_restarts", KeyType::integer, "EM restarts"},
      {"max_iters", KeyType::integer, "EM iteration cap"},
      {"rel_tol", KeyType::real, "relative ELBO change that stops EM"},
      {"alpha", KeyType::real, "Dirichlet concentration on mixture weights (>= 1)"},
      {"l2", KeyType::real, "logistic regression L2 penalty"},
      {"out", KeyType::str, "output run directory"},
  };
  return keys;
}

std::string flag_name(std::string_view key) {
  std::string s(key);
  for (auto& c : s)
    if (c == '_') c = '-';
  return s;
}

namespace {

const KeySpec& find_key(std::string_view name) {
  for (const auto& k : config_keys())
    if (k.name == name) return k;
  throw UsageError("unknown configuration key '" + std::string(name) + "'");
}

template <class T>
T parse_number(std::string_view tok, std::string_view key) {
  while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
  while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
  T v{};
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size())
    throw UsageError("--" + flag_name(key) + ": cannot parse '" + std::string(tok) + "'");
  return v;
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto pos = s.find(',', start);
    const auto tok = s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    if (!tok.empty()) out.push_back(tok);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// Shape check for values that come from a JSON file.
void check_type(const KeySpec& k, const json& v) {
  if (v.is_null()) return;
  bool ok = false;
  switch (k.type) {
    case KeyType::str: ok = v.is_string(); break;
    case KeyType::real: ok = v.is_number(); break;
    case KeyType::integer: ok = v.is_number_integer(); break;
    case KeyType::u64: ok = v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0); break;
    case KeyType::real_list:
    case KeyType::int_list:
    case KeyType::u64_list:
      ok = v.is_array();
      for (const auto& e : v) ok = ok && (k.type == KeyType::real_list ? e.is_number() : e.is_number_integer());
      break;
    case KeyType::str_list:
      ok = v.is_array() || v.is_string();
      if (v.is_array())
        for (const auto& e : v) ok = ok && e.is_string();
      break;
  }
  if (!ok) throw UsageError("configuration key '" + std::string(k.name) + "' has the wrong type");
}

}  // namespace

json parse_value(const KeySpec& key, const std::string& text) {
  switch (key.type) {
    case KeyType::str: return text;
    case KeyType::real: return parse_number<double>(text, key.name);
    case KeyType::integer: return parse_number<long long>(text, key.name);
    case KeyType::u64: return parse_number<std::uint64_t>(text, key.name);
    case KeyType::real_list: {
      json a = json::array();
      for (auto t : split_list(text)) a.push_back(parse_number<double>(t, key.name));
      return a;
    }
    case KeyType::int_list: {
      json a = json::array();
      for (auto t : split_list(text)) a.push_back(parse_number<long long>(t, key.name));
      return a;
    }
    case KeyType::u64_list: {
      json a = json::array();
      for (auto t : split_list(text)) a.push_back(parse_number<std::uint64_t>(t, key.name));
      return a;
    }
    case KeyType::str_list: {
      json a = json::array();
      for (auto t : split_list(text)) a.push_back(std::string(t));
      return a;
    }
  }
  return nullptr;
}

ExperimentConfig::ExperimentConfig() {
  doc_ = json::object();
  for (const auto& k : config_keys()) doc_[std::string(k.name)] = nullptr;
  doc_["dataset"] = "analysis";
  doc_["n"] = 4000;
  doc_["test_fraction"] = 0.5;
  doc_["seq_len"] = 30;
  doc_["mu"] = 6.0;
  doc_["gap"] = 6.0;
  doc_["model"] = json::array({"pf-gmm"});
  doc_["K"] = 2;
  doc_["seed"] = 0;
  doc_["val_fraction"] = 0.2;
  doc_["n_restarts"] = 5;
  doc_["max_iters"] = 500;
  doc_["rel_tol"] = 1e-6;
  doc_["alpha"] = 1.0;
  doc_["l2"] = 1e-4;
  doc_["out"] = "run";
}

void ExperimentConfig::merge_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("config " + path + ": " + e.what());
  }
  if (!doc.is_object()) throw UsageError("config " + path + " must be a JSON object");
  for (const auto& [key, value] : doc.items()) set(key, value);
}

void ExperimentConfig::set(std::string_view key, json value) {
  const auto& k = find_key(key);
  check_type(k, value);
  if (k.type == KeyType::str_list && value.is_string()) value = json::array({value});
  doc_[std::string(key)] = std::move(value);
}

bool ExperimentConfig::has(std::string_view key) const { return !at(key).is_null(); }

json ExperimentConfig::provenance() const {
  json p = doc_;
  p.erase("out");
  return p;
}

std::string ExperimentConfig::digest() const { return hex_digest(provenance().dump()); }

const json& ExperimentConfig::at(std::string_view key) const {
  find_key(key);
  return doc_.at(std::string(key));
}

namespace {

[[noreturn]] void missing(std::string_view key) {
  throw UsageError("missing required setting --" + flag_name(key));
}

}  // namespace

std::string ExperimentConfig::str(std::string_view key) const {
  if (!has(key)) missing(key);
  return at(key).get<std::string>();
}

double ExperimentConfig::real(std::string_view key) const {
  if (!has(key)) missing(key);
  return at(key).get<double>();
}

long long ExperimentConfig::integer(std::string_view key) const {
  if (!has(key)) missing(key);
  return at(key).get<long long>();
}

std::uint64_t ExperimentConfig::u64(std::string_view key) const {
  if (!has(key)) missing(key);
  return at(key).get<std::uint64_t>();
}

std::vector<double> ExperimentConfig::reals(std::string_view key) const {
  if (!has(key)) missing(key);
  return at(key).get<std::vector<double>>();
}

std::vector<long long> ExperimentConfig::integers(std::string_view key) const {
  if (!has(key)) missing(key);
  return at(key).get<std::vector<long long>>();
}

std::vector<std::uint64_t> ExperimentConfig::u64s(std::string_view key) const {
  if (!has(key)) missing(key);
  return at(key).get<std::vector<std::uint64_t>>();
}

std::vector<std::string> ExperimentConfig::strs(std::string_view key) const {
  if (!has(key)) missing(key);
  return at(key).get<std::vector<std::string>>();
}

std::optional<double> ExperimentConfig::maybe_real(std::string_view key) const {
  if (!has(key)) return std::nullopt;
  return at(key).get<double>();
}

}  // namespace pfmix::cli
