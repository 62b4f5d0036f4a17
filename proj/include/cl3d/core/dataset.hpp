#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "cl3d/core/point_cloud.hpp"
#include "cl3d/core/synthetic.hpp"

namespace cl3d {

struct ManifestClass {
  std::string name;
  std::vector<std::string> train;  // file paths relative to the manifest directory
  std::vector<std::string> test;
  // Optional generating-mode labels aligned with train/test (synthetic data only).
  std::vector<int> train_modes;
  std::vector<int> test_modes;

  friend bool operator==(const ManifestClass&, const ManifestClass&) = default;
};

// JSON document listing classes and their sample files (.off meshes or .xyz clouds).
struct DatasetManifest {
  std::string name;
  std::size_t points_per_cloud = 1024;
  // Samples within a class share a canonical orientation (ModelNet-style);
  // when true, exemplar selection skips registration.
  bool aligned = true;
  // .xyz files are already centered and unit-scaled; skip re-normalization.
  bool normalized = false;
  std::uint64_t sampling_seed = 0;  // for OFF surface sampling
  std::vector<ManifestClass> classes;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

void to_json(nlohmann::json& j, const DatasetManifest& manifest);
void from_json(const nlohmann::json& j, DatasetManifest& manifest);

DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

// In-memory dataset: per-class train and test samples, labels are class indices.
struct Dataset {
  std::string name;
  std::vector<std::string> class_names;
  std::vector<std::vector<LabeledSample>> train;
  std::vector<std::vector<LabeledSample>> test;
  bool aligned = true;

  std::size_t num_classes() const { return class_names.size(); }
};

// Loads every file listed in the manifest. Throws DataError on unreadable
// files or when a class lists the same file under train and test.
Dataset load_dataset(const std::filesystem::path& manifest_path);

// Synthetic benchmark description: one ClassSpec per class plus split sizes.
struct SyntheticDatasetSpec {
  std::string name = "synthetic";
  std::uint64_t seed = 0;
  std::size_t train_per_class = 60;
  std::size_t test_per_class = 30;
  SyntheticOptions options;
  // Test splits cycle through modes so every mode is evaluated equally.
  bool balanced_test_modes = false;
  std::vector<ClassSpec> classes;
};

// Unknown keys are rejected with ConfigError.
SyntheticDatasetSpec synthetic_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SyntheticDatasetSpec& spec);

Dataset make_synthetic_dataset(const SyntheticDatasetSpec& spec);

// Writes one .xyz file per sample plus manifest.json; returns the manifest.
DatasetManifest write_dataset(const Dataset& dataset, const std::filesystem::path& out_dir);

// The 8-class, multi-modal benchmark used by the experiment suite.
SyntheticDatasetSpec builtin_benchmark_spec(std::uint64_t seed);

// Ordered, pairwise-disjoint class sets covering every class exactly once.
class TaskSequence {
 public:
  TaskSequence() = default;
  // Throws ConfigError when stages overlap, are empty, or miss a class.
  TaskSequence(std::vector<std::vector<int>> stages, std::size_t num_classes);

  // Classes 0..num_classes-1 in order, `per_stage` at a time (last stage may be smaller).
  static TaskSequence uniform(std::size_t num_classes, std::size_t per_stage);

  const std::vector<std::vector<int>>& stages() const { return stages_; }
  std::size_t num_stages() const { return stages_.size(); }
  std::size_t num_classes() const { return num_classes_; }
  // All classes introduced in stages 0..stage, in introduction order.
  std::vector<int> classes_through(std::size_t stage) const;

 private:
  std::vector<std::vector<int>> stages_;
  std::size_t num_classes_ = 0;
};

}  // namespace cl3d
