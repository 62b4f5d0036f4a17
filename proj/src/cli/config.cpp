#include "cl3d/cli/config.hpp"

#include <algorithm>
#include <fstream>

#include "cl3d/error.hpp"
#include "cl3d/random.hpp"

namespace cl3d {
namespace {

using json = nlohmann::json;

void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items())
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end())
      throw ConfigError(where + ": unknown key '" + key + "'");
}

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

SelectionConfig parse_selection(const json& j) {
  reject_unknown_keys(j, {"name", "exemplars_per_class", "affinity_k", "kmeans_restarts", "kmeans_max_iters", "icp"},
                      "selection");
  SelectionConfig s = selection_from_name(j.value("name", std::string("fusion")));
  s.exemplars_per_class = j.value("exemplars_per_class", s.exemplars_per_class);
  s.affinity_k = j.value("affinity_k", s.affinity_k);
  s.kmeans_restarts = j.value("kmeans_restarts", s.kmeans_restarts);
  s.kmeans_max_iters = j.value("kmeans_max_iters", s.kmeans_max_iters);
  if (j.contains("icp")) {
    const json& icp = j.at("icp");
    reject_unknown_keys(icp, {"max_iters", "tol", "z_restarts"}, "selection.icp");
    s.icp.max_iters = icp.value("max_iters", s.icp.max_iters);
    s.icp.tol = icp.value("tol", s.icp.tol);
    s.icp.z_restarts = icp.value("z_restarts", s.icp.z_restarts);
  }
  return s;
}

TrainConfig parse_train(const json& j) {
  reject_unknown_keys(j,
                      {"epochs", "batch_size", "learning_rate", "beta1", "beta2", "epsilon", "feature_width", "gamma",
                       "alpha", "distill_weight", "distill_temperature"},
                      "train");
  TrainConfig t;
  t.epochs = j.value("epochs", t.epochs);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.learning_rate = j.value("learning_rate", t.learning_rate);
  t.beta1 = j.value("beta1", t.beta1);
  t.beta2 = j.value("beta2", t.beta2);
  t.epsilon = j.value("epsilon", t.epsilon);
  t.feature_width = j.value("feature_width", t.feature_width);
  t.loss.gamma = j.value("gamma", t.loss.gamma);
  if (j.contains("alpha")) t.loss.alpha = alpha_mode_from_string(j.at("alpha").get<std::string>());
  t.loss.distill_weight = j.value("distill_weight", t.loss.distill_weight);
  t.loss.distill_temperature = j.value("distill_temperature", t.loss.distill_temperature);
  return t;
}

DatasetSource parse_source(const json& j, const std::filesystem::path& base) {
  reject_unknown_keys(j, {"manifest", "synthetic", "builtin"}, "dataset");
  if (j.size() != 1) throw ConfigError("dataset: give exactly one of manifest, synthetic or builtin");
  DatasetSource source;
  if (j.contains("manifest")) {
    source.manifest = resolve(j.at("manifest").get<std::string>(), base);
  } else if (j.contains("synthetic")) {
    source.synthetic = synthetic_spec_from_json(j.at("synthetic"));
  } else {
    const std::string name = j.at("builtin").get<std::string>();
    if (name != "benchmark") throw ConfigError("dataset: unknown builtin '" + name + "' (expected benchmark)");
    source.builtin_benchmark = true;
  }
  return source;
}

}  // namespace

json ExperimentConfig::to_json() const {
  json src;
  if (!dataset.manifest.empty()) src["manifest"] = dataset.manifest.string();
  else if (dataset.synthetic) src["synthetic"] = cl3d::to_json(*dataset.synthetic);
  else src["builtin"] = "benchmark";
  json j = {{"dataset", src},
            {"mode", cl3d::to_string(mode)},
            {"seed", seed},
            {"run", run_config().to_json()}};
  if (stages.empty()) j["classes_per_stage"] = classes_per_stage;
  else j["stages"] = stages;
  return j;
}

std::string ExperimentConfig::hash() const { return hex64(fnv1a64(to_json().dump())); }

RunConfig ExperimentConfig::run_config() const {
  RunConfig rc;
  rc.mode = mode;
  rc.selection = selection;
  rc.train = train;
  rc.seed = seed;
  rc.threads = threads;
  rc.cache_dir = cache_dir.string();
  return rc;
}

ExperimentConfig parse_experiment_config(const json& j, const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  try {
    reject_unknown_keys(j,
                        {"$schema", "dataset", "classes_per_stage", "stages", "mode", "selection", "train",
                         "output_dir", "cache_dir", "model", "seed", "threads"},
                        "config");
    if (!j.contains("dataset")) throw ConfigError("config: missing required key 'dataset'");
    c.dataset = parse_source(j.at("dataset"), base_dir);
    c.classes_per_stage = j.value("classes_per_stage", c.classes_per_stage);
    if (j.contains("stages")) c.stages = j.at("stages").get<std::vector<std::vector<int>>>();
    if (j.contains("mode")) c.mode = run_mode_from_string(j.at("mode").get<std::string>());
    if (j.contains("selection")) c.selection = parse_selection(j.at("selection"));
    if (j.contains("train")) c.train = parse_train(j.at("train"));
    if (j.contains("output_dir")) c.output_dir = resolve(j.at("output_dir").get<std::string>(), base_dir);
    if (j.contains("cache_dir")) c.cache_dir = resolve(j.at("cache_dir").get<std::string>(), base_dir);
    if (j.contains("model")) c.model = resolve(j.at("model").get<std::string>(), base_dir);
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (c.classes_per_stage == 0) throw ConfigError("config: classes_per_stage must be >= 1");
  if (c.threads == 0) throw ConfigError("config: threads must be >= 1");
  c.selection.validate();
  c.train.validate();
  return c;
}

ExperimentConfig read_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_experiment_config(j, path.parent_path());
}

json experiment_config_schema() {
  const json integer = {{"type", "integer"}, {"minimum", 1}};
  const json number = {{"type", "number"}};
  return {
      {"$schema", "https://json-schema.org/draft/2020-12/schema"},
      {"title", "cl3d experiment config"},
      {"type", "object"},
      {"additionalProperties", false},
      {"required", {"dataset"}},
      {"properties",
       {{"$schema", {{"type", "string"}}},
        {"dataset",
         {{"type", "object"},
          {"additionalProperties", false},
          {"minProperties", 1},
          {"maxProperties", 1},
          {"properties",
           {{"manifest", {{"type", "string"}}},
            {"synthetic", {{"type", "object"}}},
            {"builtin", {{"enum", {"benchmark"}}}}}}}},
        {"classes_per_stage", integer},
        {"stages", {{"type", "array"}, {"items", {{"type", "array"}, {"items", {{"type", "integer"}}}}}}},
        {"mode", {{"enum", {"rehearsal", "joint", "forgetting"}}}},
        {"selection",
         {{"type", "object"},
          {"additionalProperties", false},
          {"properties",
           {{"name", {{"enum", selection_names()}}},
            {"exemplars_per_class", integer},
            {"affinity_k", integer},
            {"kmeans_restarts", integer},
            {"kmeans_max_iters", integer},
            {"icp",
             {{"type", "object"},
              {"additionalProperties", false},
              {"properties",
               {{"max_iters", integer}, {"tol", number}, {"z_restarts", {{"type", "boolean"}}}}}}}}}}},
        {"train",
         {{"type", "object"},
          {"additionalProperties", false},
          {"properties",
           {{"epochs", integer},
            {"batch_size", integer},
            {"learning_rate", number},
            {"beta1", number},
            {"beta2", number},
            {"epsilon", number},
            {"feature_width", integer},
            {"gamma", number},
            {"alpha", {{"enum", {"uniform", "inverse_frequency"}}}},
            {"distill_weight", number},
            {"distill_temperature", number}}}}},
        {"output_dir", {{"type", "string"}}},
        {"cache_dir", {{"type", "string"}}},
        {"model", {{"type", "string"}}},
        {"seed", {{"type", "integer"}, {"minimum", 0}}},
        {"threads", integer}}}};
}

Dataset load_source(const DatasetSource& source, std::uint64_t seed) {
  if (!source.manifest.empty()) return load_dataset(source.manifest);
  if (source.synthetic) return make_synthetic_dataset(*source.synthetic);
  return make_synthetic_dataset(builtin_benchmark_spec(seed));
}

TaskSequence task_layout(const ExperimentConfig& config, std::size_t num_classes) {
  if (!config.stages.empty()) return TaskSequence(config.stages, num_classes);
  return TaskSequence::uniform(num_classes, config.classes_per_stage);
}

}  // namespace cl3d
