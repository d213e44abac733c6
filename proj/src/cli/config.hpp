#pragma once

// Experiment configuration: built-in defaults, then an optional JSON file,
// then command-line flags. Keys are snake_case in JSON and kebab-case on the
// command line (p_grid <-> --p-grid).

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace pfmix::cli {

enum class KeyType { str, real, integer, u64, real_list, int_list, u64_list, str_list };

struct KeySpec {
  std::string_view name;
  KeyType type;
  std::string_view help;
};

const std::vector<KeySpec>& config_keys();

std::string flag_name(std::string_view key);  // "p_grid" -> "p-grid"

/// Parses one flag value (lists are comma separated). UsageError on bad input.
nlohmann::json parse_value(const KeySpec& key, const std::string& text);

class ExperimentConfig {
 public:
  ExperimentConfig();

  /// Merges a JSON object; unknown keys are a usage error.
  void merge_file(const std::string& path);
  void set(std::string_view key, nlohmann::json value);

  bool has(std::string_view key) const;
  const nlohmann::json& raw() const { return doc_; }
  /// Settings that determine results; `out` is left out so a rerun into
  /// another directory has the same digest.
  nlohmann::json provenance() const;
  std::string digest() const;

  std::string str(std::string_view key) const;
  double real(std::string_view key) const;
  long long integer(std::string_view key) const;
  std::uint64_t u64(std::string_view key) const;
  std::vector<double> reals(std::string_view key) const;
  std::vector<long long> integers(std::string_view key) const;
  std::vector<std::uint64_t> u64s(std::string_view key) const;
  std::vector<std::string> strs(std::string_view key) const;
  std::optional<double> maybe_real(std::string_view key) const;

 private:
  const nlohmann::json& at(std::string_view key) const;
  nlohmann::json doc_;
};

}  // namespace pfmix::cli
