#include "cl3d/harness/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <memory>
#include <ostream>

#include "cl3d/parallel.hpp"
#include "cl3d/random.hpp"

namespace cl3d {
namespace {

constexpr std::uint64_t kInitStream = 1000;

nlohmann::json selection_json(const SelectionConfig& s) {
  return {{"name", selection_name(s)},
          {"exemplars_per_class", s.exemplars_per_class},
          {"affinity_k", s.affinity_k},
          {"kmeans_restarts", s.kmeans_restarts},
          {"kmeans_max_iters", s.kmeans_max_iters},
          {"icp", {{"max_iters", s.icp.max_iters}, {"tol", s.icp.tol}, {"z_restarts", s.icp.z_restarts}}}};
}

nlohmann::json train_json(const TrainConfig& t) {
  return {{"epochs", t.epochs},
          {"batch_size", t.batch_size},
          {"learning_rate", t.learning_rate},
          {"beta1", t.beta1},
          {"beta2", t.beta2},
          {"epsilon", t.epsilon},
          {"feature_width", t.feature_width},
          {"gamma", t.loss.gamma},
          {"alpha", to_string(t.loss.alpha)},
          {"distill_weight", t.loss.distill_weight},
          {"distill_temperature", t.loss.distill_temperature}};
}

std::string method_name(const RunConfig& config) {
  switch (config.mode) {
    case RunMode::Joint: return "joint";
    case RunMode::Forgetting: return "forgetting";
    case RunMode::Rehearsal: break;
  }
  return selection_name(config.selection);
}

ModelShape model_shape(const TrainConfig& train, int classes) {
  ModelShape shape;
  shape.feature_width = train.feature_width;
  shape.num_classes = classes;
  return shape;
}

struct StageContext {
  const Dataset& dataset;
  const RunConfig& config;
  RunReport& report;
  std::vector<int> output_index;  // dataset label -> head column
};

void log_access(StageContext& ctx, int stage, const LabeledSample& s, bool from_memory) {
  if (ctx.config.record_access) ctx.report.access_log.push_back({stage, s.label, s.id(), from_memory});
}

std::vector<ExemplarRecord> select_for_classes(StageContext& ctx, int stage, const std::vector<int>& classes,
                                               const PointNet& model, ExemplarMemory& memory) {
  const DistanceCache cache(ctx.config.cache_dir);
  const bool use_cache = !ctx.config.cache_dir.empty();
  std::vector<ClassSelection> picks(classes.size());
  std::vector<std::vector<Points>> clouds(classes.size());
  std::vector<std::vector<std::string>> ids(classes.size());
  for (std::size_t i = 0; i < classes.size(); ++i) {
    for (const auto& s : ctx.dataset.train[static_cast<std::size_t>(classes[i])]) {
      log_access(ctx, stage, s, false);
      clouds[i].push_back(s.cloud.points());
      ids[i].push_back(s.id());
    }
  }
  parallel_for(classes.size(), ctx.config.threads, [&](std::size_t i) {
    const int c = classes[i];
    SelectionConfig sel = ctx.config.selection;
    sel.seed = derive_seed(ctx.config.seed, static_cast<std::uint64_t>(stage), 2 + static_cast<std::uint64_t>(c));
    sel.threads = 1;
    ClassSamples samples{ctx.dataset.class_names[static_cast<std::size_t>(c)], clouds[i], ids[i],
                         ctx.dataset.aligned};
    picks[i] = select_class_exemplars(samples, &model, sel, use_cache ? &cache : nullptr, ctx.dataset.name);
  });

  std::vector<ExemplarRecord> records;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const int c = classes[i];
    const auto& train = ctx.dataset.train[static_cast<std::size_t>(c)];
    std::vector<LabeledSample> stored;
    for (Eigen::Index idx : picks[i].selection.indices) stored.push_back(train[static_cast<std::size_t>(idx)]);
    memory.add_class(c, std::move(stored));
    for (auto& w : picks[i].warnings) ctx.report.warnings.push_back(ctx.dataset.class_names[static_cast<std::size_t>(c)] + ": " + w);
    records.push_back({ctx.dataset.class_names[static_cast<std::size_t>(c)], selection_name(ctx.config.selection),
                       picks[i].exemplar_ids, picks[i].selection.cluster_sizes, picks[i].reference_id,
                       derive_seed(ctx.config.seed, static_cast<std::uint64_t>(stage), 2 + static_cast<std::uint64_t>(c))});
  }
  return records;
}

double evaluate_seen(StageContext& ctx, const PointNet& model, const std::vector<int>& seen, std::size_t* count) {
  std::vector<TrainingExample> tests;
  for (int c : seen)
    for (const auto& s : ctx.dataset.test[static_cast<std::size_t>(c)])
      tests.push_back({&s.cloud.points(), ctx.output_index[static_cast<std::size_t>(c)]});
  *count = tests.size();
  return evaluate(model, tests);
}

void validate_inputs(const Dataset& dataset, const TaskSequence& tasks, const RunConfig& config) {
  config.train.validate();
  if (config.mode == RunMode::Rehearsal) config.selection.validate();
  if (tasks.num_stages() == 0) throw ConfigError("run: task sequence has no stages");
  if (tasks.num_classes() != dataset.num_classes())
    throw ConfigError("run: task sequence covers " + std::to_string(tasks.num_classes()) + " classes but the dataset has " +
                      std::to_string(dataset.num_classes()));
}

void run_stages(StageContext& ctx, const TaskSequence& tasks) {
  const RunConfig& config = ctx.config;
  RunReport& report = ctx.report;
  ctx.output_index.assign(ctx.dataset.num_classes(), -1);
  {
    int next = 0;
    for (const auto& stage : tasks.stages())
      for (int c : stage) ctx.output_index[static_cast<std::size_t>(c)] = next++;
  }
  const std::uint64_t init_seed = derive_seed(config.seed, kInitStream);
  std::unique_ptr<PointNet> model;
  ExemplarMemory memory(config.selection.exemplars_per_class);

  for (std::size_t t = 0; t < tasks.num_stages(); ++t) {
    const auto started = std::chrono::steady_clock::now();
    const int stage = static_cast<int>(t);
    StageReport sr;
    sr.stage = stage;
    sr.new_classes = tasks.stages()[t];
    sr.classes_seen = tasks.classes_through(t);
    const int seen_count = static_cast<int>(sr.classes_seen.size());
    if (config.progress)
      config.progress(report.method + ": stage " + std::to_string(t + 1) + "/" + std::to_string(tasks.num_stages()));

    std::unique_ptr<PointNet> old_model;
    if (config.mode == RunMode::Joint || !model) {
      model = std::make_unique<PointNet>(model_shape(config.train, seen_count), init_seed);
    } else {
      if (config.mode == RunMode::Rehearsal) old_model = std::make_unique<PointNet>(*model);
      model->expand_classes(seen_count);
    }

    // Training pool: this stage's classes (all seen classes for joint) plus memory.
    const std::vector<int>& pool_classes = config.mode == RunMode::Joint ? sr.classes_seen : sr.new_classes;
    std::vector<TrainingExample> pool;
    for (int c : pool_classes)
      for (const auto& s : ctx.dataset.train[static_cast<std::size_t>(c)]) {
        log_access(ctx, stage, s, false);
        pool.push_back({&s.cloud.points(), ctx.output_index[static_cast<std::size_t>(c)]});
      }
    if (config.mode == RunMode::Rehearsal)
      for (const LabeledSample* s : memory.all()) {
        log_access(ctx, stage, *s, true);
        pool.push_back({&s->cloud.points(), ctx.output_index[static_cast<std::size_t>(s->label)]});
      }
    sr.train_pool = pool.size();

    const TrainLog log = train_stage(*model, pool, old_model.get(), config.train,
                                     derive_seed(config.seed, static_cast<std::uint64_t>(t), 1));
    sr.epoch_loss = log.epoch_loss;

    if (config.mode == RunMode::Rehearsal) sr.exemplars = select_for_classes(ctx, stage, sr.new_classes, *model, memory);
    sr.memory_size = memory.size();
    sr.accuracy = evaluate_seen(ctx, *model, sr.classes_seen, &sr.test_samples);
    sr.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    report.stages.push_back(std::move(sr));
  }
  if (!config.checkpoint_path.empty()) {
    Rng next(derive_seed(config.seed, tasks.num_stages(), 1));
    write_checkpoint(config.checkpoint_path, *model, next.state());
  }
}

}  // namespace

std::string to_string(RunMode mode) {
  switch (mode) {
    case RunMode::Rehearsal: return "rehearsal";
    case RunMode::Joint: return "joint";
    case RunMode::Forgetting: return "forgetting";
  }
  return "unknown";
}

RunMode run_mode_from_string(const std::string& name) {
  if (name == "rehearsal") return RunMode::Rehearsal;
  if (name == "joint") return RunMode::Joint;
  if (name == "forgetting") return RunMode::Forgetting;
  throw ConfigError("unknown run mode '" + name + "' (expected rehearsal, joint or forgetting)");
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j = {{"mode", to_string(mode)}, {"seed", seed}, {"train", train_json(train)}};
  if (mode == RunMode::Rehearsal) j["selection"] = selection_json(selection);
  return j;
}

double RunReport::average() const {
  if (stages.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& s : stages) sum += s.accuracy;
  return sum / static_cast<double>(stages.size());
}

RunReport run_protocol(const Dataset& dataset, const TaskSequence& tasks, const RunConfig& config) {
  validate_inputs(dataset, tasks, config);
  RunReport report;
  report.method = method_name(config);
  report.config = config.to_json();
  report.config_hash = hex64(fnv1a64(report.config.dump()));
  report.seed = config.seed;
  report.class_names = dataset.class_names;
  StageContext ctx{dataset, config, report, {}};
  try {
    run_stages(ctx, tasks);
  } catch (const Error& e) {
    report.failure = e.kind();
    report.error = "stage " + std::to_string(report.stages.size() + 1) + ": " + e.what();
  }
  return report;
}

RunReport run_sequence(const Dataset& dataset, const TaskSequence& tasks, RunConfig config) {
  config.mode = RunMode::Rehearsal;
  return run_protocol(dataset, tasks, config);
}

RunReport run_joint(const Dataset& dataset, const TaskSequence& tasks, RunConfig config) {
  config.mode = RunMode::Joint;
  return run_protocol(dataset, tasks, config);
}

RunReport run_forgetting(const Dataset& dataset, const TaskSequence& tasks, RunConfig config) {
  config.mode = RunMode::Forgetting;
  return run_protocol(dataset, tasks, config);
}

double compute_delta(double joint_avg_percent, double method_avg_percent) {
  return std::round(10.0 * (joint_avg_percent - method_avg_percent)) / 10.0;
}

double compute_delta(const RunReport& method, const RunReport& joint) {
  if (method.stages.size() != joint.stages.size())
    throw DataError("delta: reports cover different numbers of stages");
  for (std::size_t t = 0; t < method.stages.size(); ++t)
    if (method.stages[t].classes_seen != joint.stages[t].classes_seen)
      throw DataError("delta: reports use different task sequences");
  return compute_delta(100.0 * joint.average(), 100.0 * method.average());
}

std::vector<std::string> isolation_violations(const RunReport& report, const TaskSequence& tasks,
                                              const Dataset& dataset) {
  std::vector<std::string> violations;
  std::set<std::string> memory_ids;
  for (std::size_t t = 0; t < report.stages.size(); ++t) {
    std::set<std::string> allowed = memory_ids;
    const auto& classes = report.method == "joint" ? tasks.classes_through(t) : tasks.stages()[t];
    for (int c : classes)
      for (const auto& s : dataset.train[static_cast<std::size_t>(c)]) allowed.insert(s.id());
    for (const auto& a : report.access_log)
      if (a.stage == static_cast<int>(t) && !allowed.count(a.sample_id))
        violations.push_back("stage " + std::to_string(t + 1) + " read '" + a.sample_id + "'");
    for (const auto& rec : report.stages[t].exemplars)
      memory_ids.insert(rec.exemplar_ids.begin(), rec.exemplar_ids.end());
  }
  return violations;
}

nlohmann::json to_json(const RunReport& report, bool include_timing) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : report.stages) {
    nlohmann::json j = {{"stage", s.stage + 1},
                        {"new_classes", s.new_classes},
                        {"classes_seen", s.classes_seen.size()},
                        {"accuracy", s.accuracy},
                        {"test_samples", s.test_samples},
                        {"memory_size", s.memory_size},
                        {"train_pool", s.train_pool},
                        {"epoch_loss", s.epoch_loss}};
    if (include_timing) j["wall_seconds"] = s.wall_seconds;
    if (!s.exemplars.empty()) j["exemplars"] = exemplar_report(s.exemplars);
    stages.push_back(std::move(j));
  }
  nlohmann::json out = {{"method", report.method},
                        {"config_hash", report.config_hash},
                        {"seed", report.seed},
                        {"config", report.config},
                        {"class_names", report.class_names},
                        {"stages", stages},
                        {"avg", report.average()},
                        {"complete", report.complete()}};
  if (report.delta) out["delta"] = *report.delta;
  if (!report.warnings.empty()) out["warnings"] = report.warnings;
  if (!report.complete()) out["error"] = report.error;
  return out;
}

void write_csv(std::ostream& out, const std::vector<RunReport>& reports) {
  std::size_t stages = 0;
  for (const auto& r : reports) stages = std::max(stages, r.stages.size());
  char buf[64];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%llu", static_cast<unsigned long long>(r.seed));
    out << "# " << r.method << " config_hash=" << r.config_hash << " seed=" << buf << '\n';
  }
  out << "method";
  for (std::size_t t = 0; t < stages; ++t) out << ",stage_" << (t + 1);
  out << ",avg,delta\n";
  const RunReport* with_memory = nullptr;
  for (const auto& r : reports) {
    out << r.method;
    for (std::size_t t = 0; t < stages; ++t) {
      out << ',';
      if (t < r.stages.size()) {
        std::snprintf(buf, sizeof buf, "%.4f", 100.0 * r.stages[t].accuracy);
        out << buf;
      }
    }
    std::snprintf(buf, sizeof buf, ",%.4f,", 100.0 * r.average());
    out << buf;
    if (r.delta) {
      std::snprintf(buf, sizeof buf, "%.1f", *r.delta);
      out << buf;
    }
    out << '\n';
    if (!with_memory && !r.stages.empty() && r.stages.back().memory_size > 0) with_memory = &r;
  }
  if (with_memory) {
    out << "memory";
    for (std::size_t t = 0; t < stages; ++t) {
      out << ',';
      if (t < with_memory->stages.size()) out << with_memory->stages[t].memory_size;
    }
    out << ",,\n";
  }
}

}  // namespace cl3d
