#pragma once

#include <Eigen/Core>
#include <vector>

#include "cl3d/core/point_cloud.hpp"
#include "cl3d/geometry/kdtree.hpp"

namespace cl3d {

// Closest-point correspondences between two clouds X1 (n1 points) and X2 (n2 points).
struct NnMapping {
  std::vector<Eigen::Index> forward;   // n1 entries: nearest point of X2 for each point of X1
  std::vector<Eigen::Index> backward;  // n2 entries: nearest point of X1 for each point of X2
};

NnMapping nn_mapping(const Points& x1, const Points& x2);
NnMapping nn_mapping(const KdTree& x1, const KdTree& x2);

// Sum of the two mean (unsquared) nearest-neighbor distances. Inputs must
// already be aligned; no registration happens here.
double chamfer(const Points& x1, const Points& x2);
double chamfer(const KdTree& x1, const KdTree& x2);

// Chamfer distance between per-point feature clouds Z1 (n1 x F) and Z2 (n2 x F)
// using correspondences computed on the 3D clouds they were extracted from.
// Throws DataError when the mapping does not match the row counts.
double chamfer_features(const Eigen::Ref<const RowMatrix>& z1, const Eigen::Ref<const RowMatrix>& z2,
                        const NnMapping& mapping);

}  // namespace cl3d
