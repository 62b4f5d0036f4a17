#include "cl3d/exemplar/selection.hpp"

#include <algorithm>
#include <limits>

#include "cl3d/error.hpp"
#include "cl3d/random.hpp"

namespace cl3d {
namespace {

ExemplarSelection take_all(Eigen::Index count) {
  ExemplarSelection all;
  for (Eigen::Index i = 0; i < count; ++i) {
    all.indices.push_back(i);
    all.cluster_sizes.push_back(1);
  }
  return all;
}

KMeansOptions kmeans_options(const SelectionConfig& config, std::uint64_t seed) {
  KMeansOptions options;
  options.restarts = config.kmeans_restarts;
  options.max_iters = config.kmeans_max_iters;
  options.seed = seed;
  return options;
}

std::string icp_settings(const IcpOptions& icp, bool aligned) {
  return "aligned=" + std::to_string(aligned) + ";icp=" + std::to_string(icp.max_iters) + "," +
         std::to_string(icp.tol) + "," + std::to_string(icp.z_restarts);
}

}  // namespace

void SelectionConfig::validate() const {
  if (exemplars_per_class < 1) throw ConfigError("selection: exemplars_per_class must be >= 1");
  if (affinity_k < 1) throw ConfigError("selection: affinity_k must be >= 1");
  if (kmeans_restarts < 1 || kmeans_max_iters < 1) throw ConfigError("selection: k-means restarts and iterations must be >= 1");
  if (mode == SelectionMode::Spectral && domains.count() == 0)
    throw ConfigError("selection: spectral mode needs at least one domain");
  if (icp.max_iters < 1) throw ConfigError("selection: icp max_iters must be >= 1");
}

bool SelectionConfig::needs_model() const {
  switch (mode) {
    case SelectionMode::Spectral: return domains.local || domains.global;
    case SelectionMode::GlobalKmeans:
    case SelectionMode::Herding: return true;
    case SelectionMode::Random: return false;
  }
  return false;
}

bool SelectionConfig::needs_input_geometry() const {
  return mode == SelectionMode::Spectral && (domains.input || domains.local);
}

SelectionConfig selection_from_name(const std::string& name, SelectionConfig base) {
  base.mode = SelectionMode::Spectral;
  if (name == "global" || name == "global_kmeans") {
    base.mode = SelectionMode::GlobalKmeans;
    base.domains = {false, false, true};
  } else if (name == "herding") {
    base.mode = SelectionMode::Herding;
    base.domains = {false, false, true};
  } else if (name == "random") {
    base.mode = SelectionMode::Random;
    base.domains = {};
  } else if (name == "fusion") {
    base.domains = {true, true, true};
  } else if (name == "global_spectral") {
    base.domains = {false, false, true};
  } else {
    DomainSet d;
    std::size_t start = 0;
    bool ok = !name.empty();
    while (ok && start <= name.size()) {
      const std::size_t plus = std::min(name.find('+', start), name.size());
      const std::string part = name.substr(start, plus - start);
      bool* slot = part == "input" ? &d.input : part == "local" ? &d.local : part == "global" ? &d.global : nullptr;
      if (!slot || *slot) ok = false;
      else *slot = true;
      start = plus + 1;
    }
    // A lone "global" is handled above; here it only appears inside a combination.
    if (!ok) throw ConfigError("unknown selection mode '" + name + "'");
    base.domains = d;
  }
  return base;
}

std::string selection_name(const SelectionConfig& config) {
  switch (config.mode) {
    case SelectionMode::GlobalKmeans: return "global";
    case SelectionMode::Herding: return "herding";
    case SelectionMode::Random: return "random";
    case SelectionMode::Spectral: break;
  }
  const DomainSet& d = config.domains;
  if (d.input && d.local && d.global) return "fusion";
  if (d.global && d.count() == 1) return "global_spectral";
  std::string name;
  if (d.input) name += "input";
  if (d.local) name += name.empty() ? "local" : "+local";
  if (d.global) name += name.empty() ? "global" : "+global";
  return name;
}

std::vector<std::string> selection_names() {
  return {"input", "local", "global", "global_spectral", "input+local", "input+global", "local+global",
          "fusion", "herding", "random"};
}

Alignment align_class(std::span<const Points> clouds, bool already_aligned, const IcpOptions& icp) {
  if (clouds.empty()) throw DataError("align_class: no samples");
  Alignment out;
  out.clouds.assign(clouds.begin(), clouds.end());
  out.transforms.assign(clouds.size(), RigidTransform::identity());
  if (already_aligned) return out;
  for (std::size_t i = 1; i < clouds.size(); ++i) {
    try {
      const IcpResult reg = icp_register(clouds[i], clouds[0], icp);
      out.transforms[i] = reg.transform;
      out.clouds[i] = reg.transform.apply(clouds[i]);
    } catch (const NumericalError& e) {
      out.warnings.push_back("sample " + std::to_string(i) + " left unaligned: " + e.what());
    }
  }
  return out;
}

FeatureExtraction extract_features(const PointNet& model, std::span<const Points> clouds, int batch_size) {
  FeatureExtraction out;
  out.global.resize(static_cast<Eigen::Index>(clouds.size()), model.feature_width());
  std::vector<const Points*> ptrs;
  for (const auto& c : clouds) ptrs.push_back(&c);
  const auto step = static_cast<std::size_t>(std::max(1, batch_size));
  for (std::size_t lo = 0; lo < ptrs.size(); lo += step) {
    const std::size_t hi = std::min(ptrs.size(), lo + step);
    const BatchTrace tr = model.forward_batch(std::span(ptrs).subspan(lo, hi - lo));
    for (std::size_t b = 0; b < hi - lo; ++b) {
      const Eigen::Index begin = tr.offsets[b];
      out.local.emplace_back(tr.local.middleRows(begin, tr.offsets[b + 1] - begin));
    }
    out.global.middleRows(static_cast<Eigen::Index>(lo), static_cast<Eigen::Index>(hi - lo)) = tr.global;
  }
  return out;
}

DomainEmbedding embed_input(std::span<const Points> aligned, const std::vector<std::string>& ids, int k_dims,
                            int affinity_k, unsigned threads, const DistanceCache* cache,
                            const std::string& cache_scope) {
  std::optional<DistanceMatrix> dmat;
  std::uint64_t key = 0;
  if (cache) {
    key = DistanceCache::key(cache_scope, "", Metric::Chamfer3d, "", ids);
    dmat = cache->load(key, Metric::Chamfer3d, ids);
  }
  if (!dmat) {
    dmat = chamfer_distance_matrix(aligned, ids, threads);
    if (cache) cache->store(key, Metric::Chamfer3d, *dmat);
  }
  return {spectral_embed(knn_affinity(*dmat, affinity_k), k_dims, Domain::Input), ids};
}

DomainEmbedding embed_local(std::span<const Points> aligned, std::span<const RowMatrix> features,
                            const std::vector<std::string>& ids, int k_dims, int affinity_k, unsigned threads) {
  const DistanceMatrix dmat = feature_chamfer_distance_matrix(aligned, features, ids, threads);
  return {spectral_embed(knn_affinity(dmat, affinity_k), k_dims, Domain::Local), ids};
}

DomainEmbedding embed_global(const Eigen::Ref<const RowMatrix>& global, const std::vector<std::string>& ids,
                             int k_dims, int affinity_k) {
  const DistanceMatrix dmat = euclidean_distance_matrix(global, ids);
  return {spectral_embed(knn_affinity(dmat, affinity_k), k_dims, Domain::Global), ids};
}

RowMatrix concatenate_embeddings(std::span<const DomainEmbedding> blocks) {
  if (blocks.empty()) throw DataError("fusion: no embeddings to concatenate");
  const Eigen::Index rows = blocks[0].embedding.samples();
  const Eigen::Index dims = blocks[0].embedding.dims();
  for (const auto& b : blocks) {
    if (b.ids != blocks[0].ids || b.embedding.samples() != rows)
      throw DataError("fusion: embedding row order mismatch between domains");
    if (b.embedding.dims() != dims) throw DataError("fusion: embeddings differ in width");
  }
  RowMatrix out(rows, dims * static_cast<Eigen::Index>(blocks.size()));
  for (std::size_t i = 0; i < blocks.size(); ++i)
    out.middleCols(static_cast<Eigen::Index>(i) * dims, dims) = blocks[i].embedding.vectors;
  return out;
}

ExemplarSelection select_by_kmeans(const Eigen::Ref<const RowMatrix>& rows, int k, const KMeansOptions& options) {
  if (k < 1) throw ConfigError("selection: K must be >= 1");
  if (rows.rows() == 0) throw DataError("selection: class has no samples");
  if (rows.rows() <= k) return take_all(rows.rows());
  const ClusterAssignment assignment = kmeans(rows, k, options);
  ExemplarSelection out;
  out.indices = nearest_to_centroid(rows, assignment);
  out.cluster_sizes.assign(static_cast<std::size_t>(k), 0);
  for (int l : assignment.labels) ++out.cluster_sizes[static_cast<std::size_t>(l)];
  return out;
}

ExemplarSelection select_global_kmeans(const Eigen::Ref<const RowMatrix>& global, int k, const KMeansOptions& options) {
  return select_by_kmeans(global, k, options);
}

ExemplarSelection select_fusion(std::span<const DomainEmbedding> blocks, int k, const KMeansOptions& options) {
  return select_by_kmeans(concatenate_embeddings(blocks), k, options);
}

ExemplarSelection select_herding(const Eigen::Ref<const RowMatrix>& global, int k) {
  if (k < 1) throw ConfigError("selection: K must be >= 1");
  const Eigen::Index n = global.rows();
  if (n == 0) throw DataError("selection: class has no samples");
  const Eigen::RowVectorXd mean = global.colwise().mean();
  Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(global.cols());
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  ExemplarSelection out;
  const Eigen::Index picks = std::min<Eigen::Index>(k, n);
  for (Eigen::Index m = 0; m < picks; ++m) {
    Eigen::Index best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (used[static_cast<std::size_t>(i)]) continue;
      const double d = (mean - (sum + global.row(i)) / static_cast<double>(m + 1)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    used[static_cast<std::size_t>(best)] = 1;
    sum += global.row(best);
    out.indices.push_back(best);
  }
  return out;
}

ExemplarSelection select_random(Eigen::Index count, int k, std::uint64_t seed) {
  if (k < 1) throw ConfigError("selection: K must be >= 1");
  if (count == 0) throw DataError("selection: class has no samples");
  std::vector<Eigen::Index> pool(static_cast<std::size_t>(count));
  for (Eigen::Index i = 0; i < count; ++i) pool[static_cast<std::size_t>(i)] = i;
  Rng rng(seed);
  const std::size_t picks = std::min<std::size_t>(static_cast<std::size_t>(k), pool.size());
  for (std::size_t i = 0; i < picks; ++i) {
    const std::size_t j = i + rng.uniform_index(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(picks);
  return {pool, {}};
}

ClassSelection select_class_exemplars(const ClassSamples& samples, const PointNet* model,
                                      const SelectionConfig& config, const DistanceCache* cache,
                                      const std::string& dataset_name) {
  config.validate();
  const auto count = static_cast<Eigen::Index>(samples.clouds.size());
  if (count == 0) throw DataError("selection: class '" + samples.class_name + "' has no samples");
  if (static_cast<Eigen::Index>(samples.ids.size()) != count)
    throw DataError("selection: id count does not match sample count");
  if (config.needs_model() && model == nullptr)
    throw ConfigError("model required for selection mode '" + selection_name(config) + "'");

  ClassSelection out;
  out.reference_id = samples.ids.front();
  const int k = config.exemplars_per_class;
  const KMeansOptions km = kmeans_options(config, config.seed);

  if (config.mode == SelectionMode::Random) {
    out.selection = select_random(count, k, config.seed);
  } else if (count <= k) {
    out.selection = take_all(count);
  } else {
    // Features always come from aligned inputs.
    Alignment alignment = align_class(samples.clouds, samples.aligned, config.icp);
    out.warnings = std::move(alignment.warnings);
    std::optional<FeatureExtraction> features;
    if (config.needs_model()) features = extract_features(*model, alignment.clouds);

    if (config.mode == SelectionMode::GlobalKmeans) {
      out.selection = select_global_kmeans(features->global, k, km);
    } else if (config.mode == SelectionMode::Herding) {
      out.selection = select_herding(features->global, k);
    } else {
      std::vector<DomainEmbedding> blocks;
      if (config.domains.input) {
        const std::string scope = dataset_name.empty() ? std::string()
                                                       : dataset_name + "/" + samples.class_name + "/" +
                                                             icp_settings(config.icp, samples.aligned);
        blocks.push_back(embed_input(alignment.clouds, samples.ids, k, config.affinity_k, config.threads,
                                     dataset_name.empty() ? nullptr : cache, scope));
      }
      if (config.domains.local)
        blocks.push_back(embed_local(alignment.clouds, features->local, samples.ids, k, config.affinity_k,
                                     config.threads));
      if (config.domains.global) blocks.push_back(embed_global(features->global, samples.ids, k, config.affinity_k));
      out.selection = select_fusion(blocks, k, km);
    }
  }
  for (Eigen::Index i : out.selection.indices) out.exemplar_ids.push_back(samples.ids[static_cast<std::size_t>(i)]);
  return out;
}

}  // namespace cl3d
