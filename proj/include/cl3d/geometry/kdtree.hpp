#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "cl3d/core/point_cloud.hpp"

namespace cl3d {

struct Neighbor {
  Eigen::Index index = -1;
  double distance = 0.0;
};

// Static kd-tree over 3D points. Each node splits its widest-spread axis at the
// median. Queries are exact: they return the same index and the same distance
// (bit for bit) as an exhaustive scan, ties going to the lowest point index.
class KdTree {
 public:
  static constexpr int kDefaultLeafSize = 16;

  // Throws DataError on an empty point set.
  explicit KdTree(Points points, int leaf_size = kDefaultLeafSize);

  Neighbor nearest(const Eigen::Vector3d& query) const;

  Eigen::Index size() const { return points_.rows(); }
  const Points& points() const { return points_; }

 private:
  struct Node {
    // Leaf when left < 0; then [begin, end) indexes order_.
    int left = -1;
    int right = -1;
    int axis = 0;
    double split = 0.0;
    int begin = 0;
    int end = 0;
  };

  int build(int begin, int end);
  void search(int node, const Eigen::Vector3d& query, double& best_sq, Eigen::Index& best) const;

  Points points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int leaf_size_;
};

// Squared Euclidean distance, evaluated in the fixed order dx^2 + dy^2 + dz^2
// shared by the tree and by brute-force reference code.
inline double squared_distance(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

}  // namespace cl3d
