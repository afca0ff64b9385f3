#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mtaudit/classifiers.hpp"
#include "mtaudit/corpus.hpp"

namespace mtaudit::config {

struct DomainConfig {
  std::string name;
  Tier tier = Tier::shared;
  std::filesystem::path source;
  std::filesystem::path reference;
};

enum class OracleKind { synthetic, file_cache, http_api };

struct OracleConfig {
  OracleKind kind = OracleKind::synthetic;

  // synthetic
  double memorization_rate = 0.0;
  double noise_rate = 0.0;
  std::uint64_t seed = 0;

  // file_cache
  std::filesystem::path path;
  std::string oracle_id;

  // http_api
  std::string endpoint;
  std::string auth_env;
  int max_in_flight = 1;
  double requests_per_second = 0.0;
  int max_retries = 3;
  int backoff_ms = 100;
  int batch_size = 64;
};

struct SplitConfig {
  int k = 5000;
  bool spare_probe = false;
  int shadow_groups = 5;
  int shadow_k = 5000;
  std::uint64_t seed = 0;         // derived from the master seed unless set
  std::uint64_t shadow_seed = 0;  // likewise
};

struct FeatureConfig {
  bool include_model_score = false;
  std::optional<std::filesystem::path> external_scores_path;
  std::vector<std::string> external_names;
};

struct GroupConfig {
  int size = 500;
  int n_groups = 6000;
  int sweep_step = 5;
  std::optional<double> delta_bleu;  // fixed adjustment
  bool measure_delta = false;        // measure via the spare probe instead
  std::uint64_t seed = 0;
};

struct RunConfig {
  std::uint64_t seed = 0;  // master seed; unset named seeds derive from it
  std::filesystem::path out_dir;
  std::vector<DomainConfig> domains;
  SplitConfig splits;
  OracleConfig alice;
  OracleConfig shadow;  // synthetic or file_cache; seed acts as a per-split base
  FeatureConfig features;
  std::vector<classifiers::ClassifierSpec> classifiers;
  GroupConfig group;

  nlohmann::json to_json() const;
};

// Strict parse: unknown keys anywhere are rejected; everything is validated
// before any work starts. Overrides are dot-path assignments
// ("group.size=200", "oracles.alice.noise_rate=0.3") applied before parsing.
RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides = {});
RunConfig run_config_from_json(nlohmann::json document);

}  // namespace mtaudit::config
