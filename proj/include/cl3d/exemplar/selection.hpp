#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cl3d/affinity/distance_matrix.hpp"
#include "cl3d/clustering/kmeans.hpp"
#include "cl3d/core/point_cloud.hpp"
#include "cl3d/geometry/icp.hpp"
#include "cl3d/neural/pointnet.hpp"
#include "cl3d/spectral/spectral.hpp"

namespace cl3d {

enum class SelectionMode {
  Spectral,      // k-means on concatenated spectral embeddings of the chosen domains
  GlobalKmeans,  // k-means directly on raw global features
  Herding,       // greedy running-mean matching on global features
  Random,
};

struct DomainSet {
  bool input = false;
  bool local = false;
  bool global = false;

  int count() const { return int(input) + int(local) + int(global); }
  friend bool operator==(const DomainSet&, const DomainSet&) = default;
};

struct SelectionConfig {
  SelectionMode mode = SelectionMode::Spectral;
  DomainSet domains{true, true, true};
  int exemplars_per_class = 10;  // K
  int affinity_k = 10;
  IcpOptions icp;
  std::uint64_t seed = 0;
  int kmeans_restarts = 10;
  int kmeans_max_iters = 300;
  unsigned threads = 1;

  void validate() const;
  bool needs_model() const;
  bool needs_input_geometry() const;
};

// Selection names:
//   input, local, global_spectral    one spectral domain
//   input+local, input+global, local+global, fusion (= input+local+global)
//   global, global_kmeans             k-means on raw global features
//   herding, random
// Throws ConfigError for anything else.
SelectionConfig selection_from_name(const std::string& name, SelectionConfig base = {});
std::string selection_name(const SelectionConfig& config);
std::vector<std::string> selection_names();

struct Alignment {
  std::vector<Points> clouds;               // in the reference frame of sample 0
  std::vector<RigidTransform> transforms;   // maps each original cloud into that frame
  std::vector<std::string> warnings;        // one per failed registration
};

// Registers every cloud to clouds[0] with ICP. `already_aligned` passes the
// clouds through with identity transforms. A failed registration keeps the
// unaligned cloud and records a warning.
Alignment align_class(std::span<const Points> clouds, bool already_aligned, const IcpOptions& icp = {});

struct FeatureExtraction {
  std::vector<RowMatrix> local;  // Z_i, n_i x F
  RowMatrix global;              // L x F, row i = z_i
};

FeatureExtraction extract_features(const PointNet& model, std::span<const Points> clouds, int batch_size = 64);

struct DomainEmbedding {
  SpectralEmbedding embedding;
  std::vector<std::string> ids;  // sample id of each embedding row
};

DomainEmbedding embed_input(std::span<const Points> aligned, const std::vector<std::string>& ids, int k_dims,
                            int affinity_k, unsigned threads = 1, const DistanceCache* cache = nullptr,
                            const std::string& cache_scope = {});
DomainEmbedding embed_local(std::span<const Points> aligned, std::span<const RowMatrix> features,
                            const std::vector<std::string>& ids, int k_dims, int affinity_k, unsigned threads = 1);
DomainEmbedding embed_global(const Eigen::Ref<const RowMatrix>& global, const std::vector<std::string>& ids,
                             int k_dims, int affinity_k);

// Horizontal concatenation [V_1, ..., V_m]. Throws DataError when the blocks
// disagree on sample order or width.
RowMatrix concatenate_embeddings(std::span<const DomainEmbedding> blocks);

struct ExemplarSelection {
  std::vector<Eigen::Index> indices;  // into the class sample list, in selection order
  std::vector<int> cluster_sizes;     // empty for herding and random
};

// k-means on `rows`, then the member nearest each centroid. All rows when L <= K.
ExemplarSelection select_by_kmeans(const Eigen::Ref<const RowMatrix>& rows, int k, const KMeansOptions& options);
ExemplarSelection select_global_kmeans(const Eigen::Ref<const RowMatrix>& global, int k, const KMeansOptions& options);
ExemplarSelection select_fusion(std::span<const DomainEmbedding> blocks, int k, const KMeansOptions& options);
ExemplarSelection select_herding(const Eigen::Ref<const RowMatrix>& global, int k);
ExemplarSelection select_random(Eigen::Index count, int k, std::uint64_t seed);

// One class's samples as seen by the selector.
struct ClassSamples {
  std::string class_name;
  std::span<const Points> clouds;  // dataset order; clouds[0] is the alignment reference
  std::vector<std::string> ids;
  bool aligned = true;
};

struct ClassSelection {
  ExemplarSelection selection;
  std::vector<std::string> exemplar_ids;
  std::string reference_id;
  std::vector<std::string> warnings;
};

// Full per-class pipeline for any configured mode. Throws ConfigError
// ("model required") when a feature-based mode has no model.
ClassSelection select_class_exemplars(const ClassSamples& samples, const PointNet* model,
                                      const SelectionConfig& config, const DistanceCache* cache = nullptr,
                                      const std::string& dataset_name = {});

}  // namespace cl3d
