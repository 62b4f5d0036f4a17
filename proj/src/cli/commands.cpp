#include "cl3d/cli/commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cl3d/error.hpp"
#include "cl3d/random.hpp"

namespace cl3d {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw DataError("write failed for '" + path.string() + "'");
  }
  fs::rename(tmp, path);
}

std::string seed_string(std::uint64_t seed) { return std::to_string(seed); }

int class_index(const Dataset& dataset, const std::string& name) {
  const auto it = std::find(dataset.class_names.begin(), dataset.class_names.end(), name);
  if (it == dataset.class_names.end()) throw DataError("unknown class '" + name + "'");
  return static_cast<int>(it - dataset.class_names.begin());
}

std::optional<PointNet> load_model(const ExperimentConfig& config, bool required, const std::string& purpose) {
  if (config.model.empty()) {
    if (required) throw ConfigError("model required for " + purpose + " (set \"model\" or pass --model)");
    return std::nullopt;
  }
  return read_checkpoint(config.model);
}

void throw_if_failed(const RunReport& report) {
  if (!report.complete()) {
    switch (*report.failure) {
      case ErrorKind::Config: throw ConfigError(report.error);
      case ErrorKind::Data: throw DataError(report.error);
      case ErrorKind::Numerical: throw NumericalError(report.error);
    }
  }
}

void write_reports(RunOutputs& outputs, const ExperimentConfig& config, const std::string& stem) {
  json doc = {{"config_hash", config.hash()}, {"seed", config.seed}, {"reports", json::array()}};
  for (const auto& r : outputs.reports) doc["reports"].push_back(to_json(r));
  std::ostringstream csv;
  csv << "# experiment config_hash=" << config.hash() << " seed=" << seed_string(config.seed) << '\n';
  write_csv(csv, outputs.reports);
  outputs.json_path = config.output_dir / (stem + ".json");
  outputs.csv_path = config.output_dir / (stem + ".csv");
  write_text(outputs.json_path, doc.dump(2) + "\n");
  write_text(outputs.csv_path, csv.str());
}

std::string one_line(std::string text) {
  std::replace(text.begin(), text.end(), '\n', ' ');
  std::replace(text.begin(), text.end(), '\r', ' ');
  return text;
}

const char* kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return "config";
    case ErrorKind::Data: return "data";
    case ErrorKind::Numerical: return "numerical";
  }
  return "unknown";
}

int report_error(std::ostream& err, ErrorKind kind, const std::string& message) {
  const int code = exit_code_for(kind);
  err << "error: kind=" << kind_name(kind) << " exit=" << code << " message=" << one_line(message) << std::endl;
  return code;
}

}  // namespace

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return kExitConfig;
    case ErrorKind::Data: return kExitData;
    case ErrorKind::Numerical: return kExitNumerical;
  }
  return kExitNumerical;
}

fs::path cmd_gen_synth(const fs::path& spec_path, const fs::path& out_dir, std::optional<std::uint64_t> seed) {
  SyntheticDatasetSpec spec;
  if (spec_path.empty()) {
    spec = builtin_benchmark_spec(seed.value_or(0));
  } else {
    std::ifstream in(spec_path);
    if (!in) throw ConfigError("cannot open spec '" + spec_path.string() + "'");
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("spec '" + spec_path.string() + "' is not valid JSON: " + e.what());
    }
    spec = synthetic_spec_from_json(j);
    if (seed) spec.seed = *seed;
  }
  const Dataset dataset = make_synthetic_dataset(spec);
  write_dataset(dataset, out_dir);
  const json spec_json = to_json(spec);
  const json provenance = {{"config_hash", hex64(fnv1a64(spec_json.dump()))}, {"seed", spec.seed}, {"spec", spec_json}};
  write_text(out_dir / "generation.json", provenance.dump(2) + "\n");
  return out_dir / "manifest.json";
}

json cmd_select(const ExperimentConfig& config, const std::optional<std::string>& class_name) {
  const std::optional<PointNet> model =
      load_model(config, config.selection.needs_model(), "selection mode '" + selection_name(config.selection) + "'");
  const Dataset dataset = load_source(config.dataset, config.seed);
  std::vector<int> classes;
  if (class_name) classes.push_back(class_index(dataset, *class_name));
  else
    for (std::size_t c = 0; c < dataset.num_classes(); ++c) classes.push_back(static_cast<int>(c));

  const DistanceCache cache(config.cache_dir);
  std::vector<ExemplarRecord> records;
  std::vector<std::string> warnings;
  for (int c : classes) {
    const auto& train = dataset.train[static_cast<std::size_t>(c)];
    std::vector<Points> clouds;
    std::vector<std::string> ids;
    for (const auto& s : train) {
      clouds.push_back(s.cloud.points());
      ids.push_back(s.id());
    }
    SelectionConfig sel = config.selection;
    sel.seed = derive_seed(config.seed, static_cast<std::uint64_t>(c));
    sel.threads = config.threads;
    const std::string& name = dataset.class_names[static_cast<std::size_t>(c)];
    const ClassSelection picked = select_class_exemplars({name, clouds, ids, dataset.aligned},
                                                         model ? &*model : nullptr, sel,
                                                         config.cache_dir.empty() ? nullptr : &cache, dataset.name);
    for (const auto& w : picked.warnings) warnings.push_back(name + ": " + w);
    records.push_back({name, selection_name(sel), picked.exemplar_ids, picked.selection.cluster_sizes,
                       picked.reference_id, sel.seed});
  }
  json doc = {{"config_hash", config.hash()}, {"seed", config.seed}, {"classes", exemplar_report(records)}};
  if (!warnings.empty()) doc["warnings"] = warnings;
  write_text(config.output_dir / "exemplars.json", doc.dump(2) + "\n");
  return doc;
}

RunOutputs cmd_run(const ExperimentConfig& config, bool with_joint) {
  const Dataset dataset = load_source(config.dataset, config.seed);
  const TaskSequence tasks = task_layout(config, dataset.num_classes());
  RunOutputs outputs;
  RunConfig rc = config.run_config();
  outputs.checkpoint_path = config.output_dir / "model.ckpt";
  fs::create_directories(config.output_dir);
  rc.checkpoint_path = outputs.checkpoint_path.string();
  outputs.reports.push_back(run_protocol(dataset, tasks, rc));
  if (with_joint && config.mode != RunMode::Joint && outputs.reports.front().complete()) {
    RunConfig joint = config.run_config();
    outputs.reports.push_back(run_joint(dataset, tasks, joint));
    if (outputs.reports.back().complete())
      outputs.reports.front().delta = compute_delta(outputs.reports.front(), outputs.reports.back());
  }
  write_reports(outputs, config, "report");
  for (const auto& r : outputs.reports) throw_if_failed(r);
  return outputs;
}

fs::path cmd_export_embeddings(const ExperimentConfig& config, const std::string& class_name) {
  const std::optional<PointNet> model = load_model(config, false, "");
  const Dataset dataset = load_source(config.dataset, config.seed);
  const int c = class_index(dataset, class_name);
  const auto& train = dataset.train[static_cast<std::size_t>(c)];
  std::vector<Points> clouds;
  std::vector<std::string> ids;
  for (const auto& s : train) {
    clouds.push_back(s.cloud.points());
    ids.push_back(s.id());
  }
  const int k = std::min<int>(config.selection.exemplars_per_class, static_cast<int>(clouds.size()));
  const Alignment alignment = align_class(clouds, dataset.aligned, config.selection.icp);
  std::vector<DomainEmbedding> blocks;
  blocks.push_back(embed_input(alignment.clouds, ids, k, config.selection.affinity_k, config.threads));
  if (model) {
    const FeatureExtraction features = extract_features(*model, alignment.clouds);
    blocks.push_back(embed_local(alignment.clouds, features.local, ids, k, config.selection.affinity_k, config.threads));
    blocks.push_back(embed_global(features.global, ids, k, config.selection.affinity_k));
  }
  std::ostringstream csv;
  csv << "# config_hash=" << config.hash() << " seed=" << seed_string(config.seed) << " class=" << class_name << '\n';
  for (std::size_t i = 0; i < blocks.size(); ++i) write_embedding_csv(csv, blocks[i].ids, blocks[i].embedding, i == 0);
  const fs::path path = config.output_dir / ("embeddings_" + class_name + ".csv");
  write_text(path, csv.str());
  return path;
}

RunOutputs cmd_compare(const ExperimentConfig& config, const std::vector<std::string>& methods) {
  if (methods.empty()) throw ConfigError("compare: no methods given");
  const Dataset dataset = load_source(config.dataset, config.seed);
  const TaskSequence tasks = task_layout(config, dataset.num_classes());
  RunOutputs outputs;
  for (const auto& name : methods) {
    RunConfig rc = config.run_config();
    rc.mode = RunMode::Rehearsal;
    rc.selection = selection_from_name(name, config.selection);
    outputs.reports.push_back(run_protocol(dataset, tasks, rc));
    throw_if_failed(outputs.reports.back());
  }
  RunReport joint = run_joint(dataset, tasks, config.run_config());
  throw_if_failed(joint);
  for (auto& r : outputs.reports) r.delta = compute_delta(r, joint);
  outputs.reports.push_back(std::move(joint));
  write_reports(outputs, config, "compare");
  return outputs;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spectral exemplar selection for class-incremental point-cloud classification"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "cl3d 1.0");

  // Flags shared by commands that take an experiment config.
  struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::optional<std::string> mode, selection, out_dir, model, cache_dir;
    std::optional<int> epochs, exemplars;
  };
  Overrides ov;
  auto add_config_flags = [&ov](CLI::App* cmd) {
    cmd->add_option("-c,--config", ov.config, "Experiment config (JSON)")->required();
    cmd->add_option("--seed", ov.seed, "Master seed");
    cmd->add_option("--threads", ov.threads, "Worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--mode", ov.mode, "rehearsal, joint or forgetting");
    cmd->add_option("--selection", ov.selection, "Selection mode name");
    cmd->add_option("-o,--out", ov.out_dir, "Output directory");
    cmd->add_option("--model", ov.model, "Model checkpoint");
    cmd->add_option("--cache-dir", ov.cache_dir, "Distance-matrix cache directory");
    cmd->add_option("--epochs", ov.epochs, "Training epochs per stage");
    cmd->add_option("-K,--exemplars", ov.exemplars, "Exemplars per class");
  };

  std::string spec_path, gen_out;
  std::optional<std::uint64_t> gen_seed;
  bool builtin = false;
  auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic dataset");
  gen->add_option("--spec", spec_path, "Synthetic dataset spec (JSON)");
  gen->add_flag("--builtin", builtin, "Use the built-in 8-class benchmark");
  gen->add_option("-o,--out", gen_out, "Output directory")->required();
  gen->add_option("--seed", gen_seed, "Override the spec seed");

  std::optional<std::string> select_class;
  auto* select = app.add_subcommand("select", "Select exemplars per class");
  add_config_flags(select);
  select->add_option("--class", select_class, "Only this class");

  bool with_joint = false;
  auto* run = app.add_subcommand("run", "Run the class-incremental protocol");
  add_config_flags(run);
  run->add_flag("--with-joint", with_joint, "Also run the joint reference and report Delta");

  std::string export_class;
  auto* exp = app.add_subcommand("export-embeddings", "Export spectral embeddings of one class");
  add_config_flags(exp);
  exp->add_option("--class", export_class, "Class name")->required();

  std::vector<std::string> methods{"fusion", "herding", "random"};
  auto* cmp = app.add_subcommand("compare", "Compare selection methods on one config");
  add_config_flags(cmp);
  cmp->add_option("--methods", methods, "Selection modes to compare");

  auto* schema = app.add_subcommand("schema", "Print the experiment config JSON schema");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    return report_error(err, ErrorKind::Config, e.what());
  }

  auto load_config = [&ov]() {
    ExperimentConfig config = read_experiment_config(ov.config);
    if (ov.seed) config.seed = *ov.seed;
    if (ov.threads) config.threads = *ov.threads;
    if (ov.mode) config.mode = run_mode_from_string(*ov.mode);
    if (ov.selection) config.selection = selection_from_name(*ov.selection, config.selection);
    if (ov.out_dir) config.output_dir = *ov.out_dir;
    if (ov.model) config.model = *ov.model;
    if (ov.cache_dir) config.cache_dir = *ov.cache_dir;
    if (ov.epochs) config.train.epochs = *ov.epochs;
    if (ov.exemplars) config.selection.exemplars_per_class = *ov.exemplars;
    config.selection.validate();
    config.train.validate();
    return config;
  };

  try {
    if (*gen) {
      if (builtin == !spec_path.empty()) throw ConfigError("gen-synth: give exactly one of --spec or --builtin");
      out << cmd_gen_synth(spec_path, gen_out, gen_seed).string() << '\n';
    } else if (*select) {
      const ExperimentConfig config = load_config();
      cmd_select(config, select_class);
      out << (config.output_dir / "exemplars.json").string() << '\n';
    } else if (*run) {
      ExperimentConfig config = load_config();
      const RunOutputs outputs = cmd_run(config, with_joint);
      out << outputs.csv_path.string() << '\n';
    } else if (*exp) {
      out << cmd_export_embeddings(load_config(), export_class).string() << '\n';
    } else if (*cmp) {
      const RunOutputs outputs = cmd_compare(load_config(), methods);
      out << outputs.csv_path.string() << '\n';
    } else if (*schema) {
      out << experiment_config_schema().dump(2) << '\n';
    }
  } catch (const Error& e) {
    return report_error(err, e.kind(), e.what());
  } catch (const fs::filesystem_error& e) {
    return report_error(err, ErrorKind::Data, e.what());
  } catch (const std::bad_alloc&) {
    return report_error(err, ErrorKind::Numerical, "out of memory");
  }
  return kExitOk;
}

}  // namespace cl3d
