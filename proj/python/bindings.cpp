#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cl3d/affinity/chamfer.hpp"
#include "cl3d/affinity/distance_matrix.hpp"
#include "cl3d/cli/config.hpp"
#include "cl3d/clustering/kmeans.hpp"
#include "cl3d/core/dataset.hpp"
#include "cl3d/exemplar/selection.hpp"
#include "cl3d/harness/harness.hpp"
#include "cl3d/neural/pointnet.hpp"
#include "cl3d/spectral/spectral.hpp"

namespace py = pybind11;
using namespace cl3d;

namespace {

std::vector<std::string> default_ids(std::size_t n) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back(std::to_string(i));
  return ids;
}

// JSON crosses the boundary as text; the Python wrapper does the (de)serialization.
nlohmann::json parse(const std::string& text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(e.what());
  }
}

py::dict dataset_dict(const Dataset& ds) {
  auto split = [](const std::vector<std::vector<LabeledSample>>& classes) {
    py::list out;
    for (const auto& samples : classes) {
      py::list rows;
      for (const auto& s : samples)
        rows.append(py::dict(py::arg("id") = s.id(), py::arg("label") = s.label, py::arg("mode") = s.mode,
                             py::arg("points") = s.cloud.points()));
      out.append(rows);
    }
    return out;
  };
  return py::dict(py::arg("name") = ds.name, py::arg("class_names") = ds.class_names,
                  py::arg("aligned") = ds.aligned, py::arg("train") = split(ds.train), py::arg("test") = split(ds.test));
}

py::dict select_exemplars(const std::vector<Points>& clouds, std::optional<std::vector<std::string>> ids,
                          const std::string& method, int k, int affinity_k, std::uint64_t seed, bool aligned,
                          const std::optional<std::filesystem::path>& model_path, unsigned threads) {
  SelectionConfig config = selection_from_name(method);
  config.exemplars_per_class = k;
  config.affinity_k = affinity_k;
  config.seed = seed;
  config.threads = threads;
  config.validate();
  std::optional<PointNet> model;
  if (model_path) model = read_checkpoint(*model_path);
  ClassSamples samples;
  samples.clouds = clouds;
  samples.ids = ids ? *ids : default_ids(clouds.size());
  samples.aligned = aligned;
  if (samples.ids.size() != clouds.size()) throw ConfigError("ids and clouds differ in length");
  ClassSelection sel;
  {
    py::gil_scoped_release release;
    sel = select_class_exemplars(samples, model ? &*model : nullptr, config);
  }
  return py::dict(py::arg("indices") = sel.selection.indices, py::arg("exemplar_ids") = sel.exemplar_ids,
                  py::arg("cluster_sizes") = sel.selection.cluster_sizes, py::arg("warnings") = sel.warnings);
}

std::string run_experiment(const std::string& config_json, bool with_joint) {
  const ExperimentConfig config = parse_experiment_config(parse(config_json));
  const Dataset ds = load_source(config.dataset, config.seed);
  const TaskSequence tasks = task_layout(config, ds.num_classes());
  nlohmann::json reports = nlohmann::json::array();
  py::gil_scoped_release release;
  RunReport main = run_protocol(ds, tasks, config.run_config());
  if (with_joint && config.mode != RunMode::Joint) {
    RunConfig jc = config.run_config();
    jc.mode = RunMode::Joint;
    jc.checkpoint_path.clear();
    const RunReport joint = run_protocol(ds, tasks, jc);
    if (main.complete() && joint.complete()) main.delta = compute_delta(main, joint);
    reports.push_back(to_json(main, false));
    reports.push_back(to_json(joint, false));
  } else {
    reports.push_back(to_json(main, false));
  }
  return reports.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Exemplar selection for class-incremental point-cloud classification";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def("normalize", py::overload_cast<const Eigen::Ref<const Points>&>(&normalize), py::arg("points"));
  m.def("chamfer", py::overload_cast<const Points&, const Points&>(&chamfer), py::arg("x1"), py::arg("x2"));
  m.def(
      "chamfer_distance_matrix",
      [](const std::vector<Points>& clouds, unsigned threads) {
        py::gil_scoped_release release;
        return chamfer_distance_matrix(clouds, default_ids(clouds.size()), threads).values();
      },
      py::arg("clouds"), py::arg("threads") = 1);
  m.def(
      "knn_affinity",
      [](const Eigen::MatrixXd& distances, int k) {
        return knn_affinity(DistanceMatrix(distances, default_ids(std::size_t(distances.rows()))), k).values;
      },
      py::arg("distances"), py::arg("k"));
  m.def("normalized_laplacian", &normalized_laplacian, py::arg("affinity"));
  m.def(
      "spectral_embed",
      [](const Eigen::MatrixXd& affinity, Eigen::Index k) {
        AffinityMatrix a;
        a.values = affinity;
        const SpectralEmbedding e = spectral_embed(a, k, Domain::Input);
        return py::make_tuple(e.vectors, e.eigenvalues);
      },
      py::arg("affinity"), py::arg("k"));
  m.def(
      "kmeans",
      [](const RowMatrix& rows, int k, int restarts, std::uint64_t seed) {
        const ClusterAssignment a = kmeans(rows, k, {restarts, 300, seed});
        return py::dict(py::arg("labels") = a.labels, py::arg("centroids") = a.centroids,
                        py::arg("inertia") = a.inertia, py::arg("iterations") = a.iterations);
      },
      py::arg("rows"), py::arg("k"), py::arg("restarts") = 10, py::arg("seed") = 0);
  m.def("adjusted_rand_index", &adjusted_rand_index, py::arg("a"), py::arg("b"));

  m.def("selection_names", &selection_names);
  m.def("select_exemplars", &select_exemplars, py::arg("clouds"), py::arg("ids") = py::none(),
        py::arg("method") = "fusion", py::arg("k") = 10, py::arg("affinity_k") = 10, py::arg("seed") = 0,
        py::arg("aligned") = true, py::arg("model") = py::none(), py::arg("threads") = 1);
  m.def(
      "extract_features",
      [](const std::filesystem::path& model_path, const std::vector<Points>& clouds) {
        const PointNet model = read_checkpoint(model_path);
        const FeatureExtraction f = extract_features(model, clouds);
        return py::make_tuple(f.local, f.global);
      },
      py::arg("model"), py::arg("clouds"));

  m.def(
      "_synthetic_dataset",
      [](const std::optional<std::string>& spec_json, std::uint64_t seed) {
        SyntheticDatasetSpec spec = spec_json ? synthetic_spec_from_json(parse(*spec_json)) : builtin_benchmark_spec(seed);
        spec.seed = seed;
        return dataset_dict(make_synthetic_dataset(spec));
      },
      py::arg("spec_json"), py::arg("seed"));
  m.def("_benchmark_spec", [](std::uint64_t seed) { return to_json(builtin_benchmark_spec(seed)).dump(); },
        py::arg("seed"));
  m.def("_run_experiment", &run_experiment, py::arg("config_json"), py::arg("with_joint"));
  m.def("_config_schema", [] { return experiment_config_schema().dump(); });
  m.def("compute_delta", py::overload_cast<double, double>(&compute_delta), py::arg("joint_avg_percent"),
        py::arg("method_avg_percent"));
}
