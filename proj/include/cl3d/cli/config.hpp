#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cl3d/core/dataset.hpp"
#include "cl3d/harness/harness.hpp"

namespace cl3d {

// Where the samples come from: exactly one of a manifest, an inline synthetic
// spec, or the built-in benchmark.
struct DatasetSource {
  std::filesystem::path manifest;
  std::optional<SyntheticDatasetSpec> synthetic;
  bool builtin_benchmark = false;
};

struct ExperimentConfig {
  DatasetSource dataset;
  std::size_t classes_per_stage = 2;
  std::vector<std::vector<int>> stages;  // explicit layout; overrides classes_per_stage
  RunMode mode = RunMode::Rehearsal;
  SelectionConfig selection;
  TrainConfig train;
  std::filesystem::path output_dir = "cl3d_out";
  std::filesystem::path cache_dir;
  std::filesystem::path model;  // checkpoint for select / export-embeddings
  std::uint64_t seed = 0;
  unsigned threads = 1;

  nlohmann::json to_json() const;
  std::string hash() const;  // FNV-1a of the canonical JSON
  RunConfig run_config() const;
};

// Parses and validates a config document. Unknown keys anywhere raise
// ConfigError naming the offending key. Relative paths resolve against
// `base_dir`.
ExperimentConfig parse_experiment_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig read_experiment_config(const std::filesystem::path& path);

// The JSON schema published for config files.
nlohmann::json experiment_config_schema();

Dataset load_source(const DatasetSource& source, std::uint64_t seed);
TaskSequence task_layout(const ExperimentConfig& config, std::size_t num_classes);

}  // namespace cl3d
