#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cl3d/core/dataset.hpp"
#include "cl3d/error.hpp"
#include "cl3d/exemplar/memory.hpp"
#include "cl3d/exemplar/selection.hpp"
#include "cl3d/neural/training.hpp"

namespace cl3d {

enum class RunMode {
  Rehearsal,   // exemplar memory + distillation
  Joint,       // retrain from scratch on all data seen so far
  Forgetting,  // sequential fine-tuning, no memory, no distillation
};

std::string to_string(RunMode mode);
RunMode run_mode_from_string(const std::string& name);

struct RunConfig {
  RunMode mode = RunMode::Rehearsal;
  SelectionConfig selection;
  TrainConfig train;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string cache_dir;        // distance-matrix cache; empty disables it
  bool record_access = false;   // keep the per-stage training access log
  std::string checkpoint_path;  // final model is written here when set
  std::function<void(const std::string&)> progress;  // optional status lines

  nlohmann::json to_json() const;  // omits progress and threads
};

// One training-set read made by the harness on behalf of a stage.
struct AccessRecord {
  int stage = 0;
  int label = 0;
  std::string sample_id;
  bool from_memory = false;
};

struct StageReport {
  int stage = 0;                          // 0-based
  std::vector<int> new_classes;
  std::vector<int> classes_seen;          // in introduction order
  double accuracy = 0.0;                  // in [0, 1], over all seen test samples
  std::size_t test_samples = 0;
  std::size_t memory_size = 0;            // exemplars stored after this stage
  std::size_t train_pool = 0;             // samples trained on in this stage
  std::vector<double> epoch_loss;
  double wall_seconds = 0.0;              // not part of any deterministic output
  std::vector<ExemplarRecord> exemplars;  // classes selected at this stage
};

struct RunReport {
  std::string method;  // selection name, "joint" or "forgetting"
  std::vector<StageReport> stages;
  std::optional<double> delta;  // percentage points vs a joint reference
  nlohmann::json config;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<std::string> class_names;
  std::vector<AccessRecord> access_log;
  std::vector<std::string> warnings;
  // Set when a stage failed; `stages` then holds the completed prefix.
  std::optional<ErrorKind> failure;
  std::string error;

  bool complete() const { return !failure.has_value(); }
  double average() const;  // mean stage accuracy in [0, 1]
};

// Runs the protocol described by config.mode. Never throws for stage
// failures: the partial report carries the error instead. Throws ConfigError
// for an invalid configuration before any work starts.
RunReport run_protocol(const Dataset& dataset, const TaskSequence& tasks, const RunConfig& config);
RunReport run_sequence(const Dataset& dataset, const TaskSequence& tasks, RunConfig config);
RunReport run_joint(const Dataset& dataset, const TaskSequence& tasks, RunConfig config);
RunReport run_forgetting(const Dataset& dataset, const TaskSequence& tasks, RunConfig config);

// 100 * (Avg_joint - Avg_method) rounded to one decimal. The report overload
// checks that both runs cover the same stages.
double compute_delta(double joint_avg_percent, double method_avg_percent);
double compute_delta(const RunReport& method, const RunReport& joint);

// Training ids touched during `stage` that are neither new-class samples of
// that stage nor memory exemplars available at that stage.
std::vector<std::string> isolation_violations(const RunReport& report, const TaskSequence& tasks,
                                              const Dataset& dataset);

nlohmann::json to_json(const RunReport& report, bool include_timing = true);

// Table layout: one row per method with per-stage accuracy (percent), Avg and
// Delta, followed by a memory row. Carries config hash and seed in comment
// lines. Contains no timing, so reruns are byte-identical.
void write_csv(std::ostream& out, const std::vector<RunReport>& reports);

}  // namespace cl3d
