#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cl3d/core/point_cloud.hpp"

namespace cl3d {

enum class Metric : std::uint32_t {
  Chamfer3d = 1,        // exact Chamfer between aligned 3D clouds
  ChamferFeatures = 2,  // Chamfer on local features with 3D correspondences
  Euclidean = 3,        // plain Euclidean between global feature vectors
};

std::string to_string(Metric metric);

// Symmetric, zero-diagonal, finite, nonnegative L x L matrix with the sample
// ids giving the row order.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  // Throws NumericalError when the invariants do not hold (symmetry within 1e-9).
  DistanceMatrix(Eigen::MatrixXd values, std::vector<std::string> ids);

  Eigen::Index size() const { return values_.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return values_(i, j); }
  const Eigen::MatrixXd& values() const { return values_; }
  const std::vector<std::string>& ids() const { return ids_; }

 private:
  Eigen::MatrixXd values_;
  std::vector<std::string> ids_;
};

// Pairwise Chamfer distances between aligned 3D clouds. Each unordered pair is
// computed once; pairs are spread over `threads` workers.
DistanceMatrix chamfer_distance_matrix(std::span<const Points> clouds, std::vector<std::string> ids,
                                       unsigned threads = 1);

// Feature-space Chamfer: features[i] holds one row per point of clouds[i]; the
// correspondences come from the 3D clouds.
DistanceMatrix feature_chamfer_distance_matrix(std::span<const Points> clouds, std::span<const RowMatrix> features,
                                               std::vector<std::string> ids, unsigned threads = 1);

// Euclidean distances between rows.
DistanceMatrix euclidean_distance_matrix(const Eigen::Ref<const RowMatrix>& rows, std::vector<std::string> ids);

// Binary cache file: 8-byte magic "CL3DDMAT", u32 version, u32 metric tag,
// u64 L, u64 settings hash, then the strict lower triangle (i > j) row-major as
// little-endian f64.
void write_distance_cache(const std::filesystem::path& path, const DistanceMatrix& matrix, Metric metric,
                          std::uint64_t settings_hash);

struct CachedDistances {
  Metric metric;
  std::uint64_t settings_hash;
  Eigen::MatrixXd values;
};

// Throws DataError on a corrupt or truncated file.
CachedDistances read_distance_cache(const std::filesystem::path& path);

// Directory of cache files keyed by a hash of (dataset, class, metric, settings).
class DistanceCache {
 public:
  explicit DistanceCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

  static std::uint64_t key(const std::string& dataset, const std::string& class_name, Metric metric,
                           const std::string& settings, const std::vector<std::string>& ids);

  std::optional<DistanceMatrix> load(std::uint64_t key, Metric metric, const std::vector<std::string>& ids) const;
  void store(std::uint64_t key, Metric metric, const DistanceMatrix& matrix) const;

  std::filesystem::path path_for(std::uint64_t key) const;

 private:
  std::filesystem::path dir_;
};

// Symmetrized k-nearest-neighbor connectivity: entries in {0, 0.5, 1}.
struct AffinityMatrix {
  Eigen::MatrixXd values;
  int k = 0;  // effective neighbor count, min(k, L - 1)
};

// Each sample links to its k nearest others (self excluded, ties to the lower
// index); the directed 0/1 matrix A is returned as (A + A^T) / 2.
AffinityMatrix knn_affinity(const DistanceMatrix& distances, int k);

}  // namespace cl3d
