#include "cl3d/core/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "cl3d/core/mesh.hpp"
#include "cl3d/error.hpp"
#include "cl3d/random.hpp"

namespace cl3d {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end())
      throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

}  // namespace

void to_json(json& j, const DatasetManifest& manifest) {
  j = json{{"name", manifest.name},
           {"points_per_cloud", manifest.points_per_cloud},
           {"aligned", manifest.aligned},
           {"normalized", manifest.normalized},
           {"sampling_seed", manifest.sampling_seed},
           {"classes", json::array()}};
  for (const auto& c : manifest.classes) {
    json entry{{"name", c.name}, {"train", c.train}, {"test", c.test}};
    if (!c.train_modes.empty()) entry["train_modes"] = c.train_modes;
    if (!c.test_modes.empty()) entry["test_modes"] = c.test_modes;
    j["classes"].push_back(std::move(entry));
  }
}

void from_json(const json& j, DatasetManifest& manifest) {
  try {
    reject_unknown_keys(j, {"name", "points_per_cloud", "aligned", "normalized", "sampling_seed", "classes"},
                        "manifest");
    manifest = DatasetManifest{};
    manifest.name = j.value("name", std::string{});
    manifest.points_per_cloud = j.value("points_per_cloud", std::size_t{1024});
    manifest.aligned = j.value("aligned", true);
    manifest.normalized = j.value("normalized", false);
    manifest.sampling_seed = j.value("sampling_seed", std::uint64_t{0});
    for (const auto& entry : j.at("classes")) {
      reject_unknown_keys(entry, {"name", "train", "test", "train_modes", "test_modes"}, "manifest class");
      ManifestClass c;
      c.name = entry.at("name").get<std::string>();
      c.train = entry.at("train").get<std::vector<std::string>>();
      c.test = entry.at("test").get<std::vector<std::string>>();
      c.train_modes = entry.value("train_modes", std::vector<int>{});
      c.test_modes = entry.value("test_modes", std::vector<int>{});
      manifest.classes.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("manifest: ") + e.what());
  }
  if (manifest.points_per_cloud == 0) throw ConfigError("manifest: points_per_cloud must be >= 1");
  if (manifest.classes.empty()) throw ConfigError("manifest: no classes");
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("manifest '" + path.string() + "': " + e.what());
  }
  return j.get<DatasetManifest>();
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest '" + path.string() + "'");
  out << json(manifest).dump(2) << '\n';
}

namespace {

std::string stem_id(const std::string& relative) {
  std::filesystem::path p(relative);
  p.replace_extension();
  return p.generic_string();
}

LabeledSample load_sample(const std::filesystem::path& root, const std::string& relative,
                          const DatasetManifest& manifest, int label, int mode) {
  const std::filesystem::path path = root / relative;
  const std::string ext = path.extension().string();
  const std::string id = stem_id(relative);
  if (ext == ".off") {
    const Mesh mesh = read_off(path);
    PointCloud sampled = sample_surface(mesh, manifest.points_per_cloud,
                                        derive_seed(manifest.sampling_seed, fnv1a64(relative)), id);
    return {normalize(sampled), label, mode};
  }
  if (ext == ".xyz" || ext == ".txt") {
    Points points = read_xyz(path);
    if (points.rows() == 0) throw DataError("'" + path.string() + "' has no points");
    if (!manifest.normalized) points = normalize(points);
    return {PointCloud(std::move(points), id), label, mode};
  }
  throw DataError("unsupported sample file type '" + path.string() + "'");
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  const DatasetManifest manifest = read_manifest(manifest_path);
  const std::filesystem::path root = manifest_path.parent_path();
  Dataset dataset;
  dataset.name = manifest.name;
  dataset.aligned = manifest.aligned;
  for (std::size_t c = 0; c < manifest.classes.size(); ++c) {
    const auto& entry = manifest.classes[c];
    std::set<std::string> train_files(entry.train.begin(), entry.train.end());
    for (const auto& f : entry.test)
      if (train_files.count(f)) throw DataError("class '" + entry.name + "' lists '" + f + "' in both train and test");
    const int label = static_cast<int>(c);
    auto mode_of = [](const std::vector<int>& modes, std::size_t i) {
      return i < modes.size() ? modes[i] : -1;
    };
    dataset.class_names.push_back(entry.name);
    dataset.train.emplace_back();
    dataset.test.emplace_back();
    for (std::size_t i = 0; i < entry.train.size(); ++i)
      dataset.train.back().push_back(load_sample(root, entry.train[i], manifest, label, mode_of(entry.train_modes, i)));
    for (std::size_t i = 0; i < entry.test.size(); ++i)
      dataset.test.back().push_back(load_sample(root, entry.test[i], manifest, label, mode_of(entry.test_modes, i)));
  }
  return dataset;
}

SyntheticDatasetSpec synthetic_spec_from_json(const json& j) {
  SyntheticDatasetSpec spec;
  try {
    reject_unknown_keys(j,
                        {"name", "seed", "train_per_class", "test_per_class", "points_per_cloud", "noise",
                         "aspect_jitter", "rotate_z", "balanced_test_modes", "classes"},
                        "synthetic spec");
    spec.name = j.value("name", spec.name);
    spec.seed = j.value("seed", spec.seed);
    spec.train_per_class = j.value("train_per_class", spec.train_per_class);
    spec.test_per_class = j.value("test_per_class", spec.test_per_class);
    spec.options.points = j.value("points_per_cloud", spec.options.points);
    spec.options.noise = j.value("noise", spec.options.noise);
    spec.options.aspect_jitter = j.value("aspect_jitter", spec.options.aspect_jitter);
    spec.options.rotate_z = j.value("rotate_z", spec.options.rotate_z);
    spec.balanced_test_modes = j.value("balanced_test_modes", spec.balanced_test_modes);
    for (const auto& jc : j.at("classes")) {
      reject_unknown_keys(jc, {"name", "modes"}, "synthetic class");
      ClassSpec c;
      c.name = jc.at("name").get<std::string>();
      for (const auto& jm : jc.at("modes")) {
        reject_unknown_keys(jm, {"shape", "aspect", "weight", "tube"}, "shape mode");
        ShapeMode m;
        m.primitive = primitive_from_string(jm.at("shape").get<std::string>());
        if (jm.contains("aspect")) {
          const auto a = jm.at("aspect").get<std::vector<double>>();
          if (a.size() != 3) throw ConfigError("shape mode: aspect needs 3 values");
          m.aspect = Eigen::Vector3d(a[0], a[1], a[2]);
        }
        m.weight = jm.value("weight", 1.0);
        m.tube = jm.value("tube", m.tube);
        if (!(m.weight > 0.0)) throw ConfigError("shape mode: weight must be positive");
        c.modes.push_back(m);
      }
      if (c.modes.empty()) throw ConfigError("synthetic class '" + c.name + "' has no modes");
      spec.classes.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synthetic spec: ") + e.what());
  }
  if (spec.classes.empty()) throw ConfigError("synthetic spec: no classes");
  if (spec.train_per_class == 0 || spec.test_per_class == 0)
    throw ConfigError("synthetic spec: per-class counts must be >= 1");
  return spec;
}

json to_json(const SyntheticDatasetSpec& spec) {
  json j{{"name", spec.name},
         {"seed", spec.seed},
         {"train_per_class", spec.train_per_class},
         {"test_per_class", spec.test_per_class},
         {"points_per_cloud", spec.options.points},
         {"noise", spec.options.noise},
         {"aspect_jitter", spec.options.aspect_jitter},
         {"rotate_z", spec.options.rotate_z},
         {"balanced_test_modes", spec.balanced_test_modes},
         {"classes", json::array()}};
  for (const auto& c : spec.classes) {
    json modes = json::array();
    for (const auto& m : c.modes)
      modes.push_back({{"shape", to_string(m.primitive)},
                       {"aspect", {m.aspect[0], m.aspect[1], m.aspect[2]}},
                       {"weight", m.weight},
                       {"tube", m.tube}});
    j["classes"].push_back({{"name", c.name}, {"modes", modes}});
  }
  return j;
}

Dataset make_synthetic_dataset(const SyntheticDatasetSpec& spec) {
  Dataset dataset;
  dataset.name = spec.name;
  dataset.aligned = !spec.options.rotate_z;
  SyntheticOptions test_options = spec.options;
  test_options.balanced_modes = spec.balanced_test_modes;
  for (std::size_t c = 0; c < spec.classes.size(); ++c) {
    const auto& cls = spec.classes[c];
    const int label = static_cast<int>(c);
    dataset.class_names.push_back(cls.name);
    dataset.train.push_back(generate_synthetic(cls, label, spec.train_per_class, derive_seed(spec.seed, c, 0),
                                               spec.options, cls.name + "/train_"));
    dataset.test.push_back(generate_synthetic(cls, label, spec.test_per_class, derive_seed(spec.seed, c, 1),
                                              test_options, cls.name + "/test_"));
  }
  return dataset;
}

DatasetManifest write_dataset(const Dataset& dataset, const std::filesystem::path& out_dir) {
  DatasetManifest manifest;
  manifest.name = dataset.name;
  manifest.aligned = dataset.aligned;
  manifest.normalized = true;
  manifest.points_per_cloud = 0;
  for (std::size_t c = 0; c < dataset.num_classes(); ++c) {
    ManifestClass entry;
    entry.name = dataset.class_names[c];
    std::filesystem::create_directories(out_dir / entry.name);
    auto emit = [&](const std::vector<LabeledSample>& samples, std::vector<std::string>& files,
                    std::vector<int>& modes) {
      bool any_mode = false;
      for (const auto& s : samples) {
        const std::string relative = s.id() + ".xyz";
        std::filesystem::create_directories((out_dir / relative).parent_path());
        write_xyz(out_dir / relative, s.cloud.points());
        files.push_back(relative);
        modes.push_back(s.mode);
        any_mode = any_mode || s.mode >= 0;
        manifest.points_per_cloud = std::max<std::size_t>(manifest.points_per_cloud,
                                                          static_cast<std::size_t>(s.cloud.size()));
      }
      if (!any_mode) modes.clear();
    };
    emit(dataset.train[c], entry.train, entry.train_modes);
    emit(dataset.test[c], entry.test, entry.test_modes);
    manifest.classes.push_back(std::move(entry));
  }
  if (manifest.points_per_cloud == 0) manifest.points_per_cloud = 1024;
  write_manifest(out_dir / "manifest.json", manifest);
  return manifest;
}

SyntheticDatasetSpec builtin_benchmark_spec(std::uint64_t seed) {
  auto mode = [](Primitive p, double ax, double ay, double az, double w, double tube = 0.3) {
    ShapeMode m;
    m.primitive = p;
    m.aspect = Eigen::Vector3d(ax, ay, az);
    m.weight = w;
    m.tube = tube;
    return m;
  };
  using P = Primitive;
  SyntheticDatasetSpec spec;
  spec.name = "planted-multimodal-8";
  spec.seed = seed;
  spec.train_per_class = 120;
  spec.test_per_class = 60;
  spec.options.points = 128;
  spec.options.noise = 0.01;
  spec.options.aspect_jitter = 0.1;
  spec.balanced_test_modes = true;
  // every mode is a distinct shape across the whole set
  spec.classes = {
      {"orb", {mode(P::Sphere, 1, 1, 1, 0.5), mode(P::Box, 1, 1, 0.08, 0.3), mode(P::Cylinder, 1, 1, 0.45, 0.2)}},
      {"crate", {mode(P::Box, 1, 1, 1, 0.5), mode(P::Torus, 1, 1, 1, 0.3, 0.12), mode(P::Box, 1, 0.6, 0.6, 0.2)}},
      {"pillar", {mode(P::Cylinder, 0.35, 0.35, 1, 0.6), mode(P::Sphere, 1, 1, 0.3, 0.4)}},
      {"ring", {mode(P::Torus, 1, 1, 1, 0.5, 0.35), mode(P::Cylinder, 0.8, 0.8, 1, 0.3), mode(P::Torus, 1, 0.5, 1, 0.2, 0.25)}},
      {"slab", {mode(P::Box, 1, 0.5, 0.12, 0.5), mode(P::Box, 0.55, 0.55, 1, 0.3), mode(P::Box, 1, 1, 0.45, 0.2)}},
      {"egg", {mode(P::Sphere, 0.5, 0.5, 1, 0.6), mode(P::Torus, 1, 1, 2.5, 0.4, 0.3)}},
      {"disc", {mode(P::Cylinder, 1, 1, 0.12, 0.6), mode(P::Box, 0.15, 0.15, 1, 0.4)}},
      {"bar", {mode(P::Box, 1, 0.25, 0.25, 0.6), mode(P::Sphere, 1, 0.6, 0.2, 0.4)}},
  };
  return spec;
}

TaskSequence::TaskSequence(std::vector<std::vector<int>> stages, std::size_t num_classes)
    : stages_(std::move(stages)), num_classes_(num_classes) {
  if (stages_.empty()) throw ConfigError("task sequence has no stages");
  std::vector<int> seen(num_classes, 0);
  for (std::size_t t = 0; t < stages_.size(); ++t) {
    if (stages_[t].empty()) throw ConfigError("stage " + std::to_string(t + 1) + " has no classes");
    for (int c : stages_[t]) {
      if (c < 0 || static_cast<std::size_t>(c) >= num_classes)
        throw ConfigError("stage " + std::to_string(t + 1) + " references unknown class " + std::to_string(c));
      if (seen[static_cast<std::size_t>(c)]++)
        throw ConfigError("class " + std::to_string(c) + " appears in more than one stage");
    }
  }
  for (std::size_t c = 0; c < num_classes; ++c)
    if (!seen[c]) throw ConfigError("class " + std::to_string(c) + " is not assigned to any stage");
}

TaskSequence TaskSequence::uniform(std::size_t num_classes, std::size_t per_stage) {
  if (per_stage == 0) throw ConfigError("classes per stage must be >= 1");
  std::vector<std::vector<int>> stages;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (c % per_stage == 0) stages.emplace_back();
    stages.back().push_back(static_cast<int>(c));
  }
  return TaskSequence(std::move(stages), num_classes);
}

std::vector<int> TaskSequence::classes_through(std::size_t stage) const {
  std::vector<int> classes;
  for (std::size_t t = 0; t <= stage && t < stages_.size(); ++t)
    classes.insert(classes.end(), stages_[t].begin(), stages_[t].end());
  return classes;
}

}  // namespace cl3d
