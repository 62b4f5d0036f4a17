#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <string>
#include <vector>

namespace cl3d {

// n x 3, one point per row.
using Points = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
// Row-major dense matrix; rows are samples or per-point feature vectors.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// An unordered set of 3D points with a stable identifier. Immutable once built.
class PointCloud {
 public:
  PointCloud() = default;

  // Throws DataError if the cloud is empty or any coordinate is non-finite.
  PointCloud(Points points, std::string sample_id);

  const Points& points() const { return points_; }
  const std::string& id() const { return id_; }
  Eigen::Index size() const { return points_.rows(); }

  friend bool operator==(const PointCloud& a, const PointCloud& b) {
    return a.id_ == b.id_ && a.points_.rows() == b.points_.rows() &&
           (a.points_.array() == b.points_.array()).all();
  }

 private:
  Points points_;
  std::string id_;
};

struct LabeledSample {
  PointCloud cloud;
  int label = 0;
  // Generating shape mode for synthetic data, -1 when unknown. Never seen by
  // training or selection; used by cluster-recovery tests only.
  int mode = -1;

  const std::string& id() const { return cloud.id(); }
};

// Translate the centroid to the origin and scale so the farthest point has norm 1.
// Throws DataError when all points coincide.
Points normalize(const Eigen::Ref<const Points>& points);
PointCloud normalize(const PointCloud& cloud);

// Whitespace-separated "x y z" per line; blank lines and '#' comments ignored.
Points read_xyz(const std::filesystem::path& path);
// Written with 17 significant digits so a read-back is bit-exact.
void write_xyz(const std::filesystem::path& path, const Eigen::Ref<const Points>& points);

}  // namespace cl3d
