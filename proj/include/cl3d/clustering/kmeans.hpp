#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "cl3d/core/point_cloud.hpp"

namespace cl3d {

struct KMeansOptions {
  int restarts = 10;
  int max_iters = 300;
  std::uint64_t seed = 0;
};

struct ClusterAssignment {
  std::vector<int> labels;  // one cluster id in [0, K) per row
  RowMatrix centroids;      // K x d
  double inertia = 0.0;     // sum of squared distances to assigned centroids
  int iterations = 0;       // Lloyd iterations of the winning restart
  // Inertia after every assignment and update step of the winning restart.
  std::vector<double> inertia_trace;

  int clusters() const { return static_cast<int>(centroids.rows()); }
};

// k-means++ seeding followed by Lloyd iterations until the assignment stops
// changing (or max_iters), repeated `restarts` times; the lowest-inertia run
// wins. Empty clusters are repaired by moving the point farthest from its
// centroid into them. Distance ties go to the lower cluster id.
// Throws ConfigError unless 1 <= k <= rows.
ClusterAssignment kmeans(const Eigen::Ref<const RowMatrix>& rows, int k, const KMeansOptions& options = {});

// For each cluster, the member row closest to its centroid (lowest index on ties).
std::vector<Eigen::Index> nearest_to_centroid(const Eigen::Ref<const RowMatrix>& rows,
                                              const ClusterAssignment& assignment);

// Sum of squared distances of rows to their assigned centroids.
double compute_inertia(const Eigen::Ref<const RowMatrix>& rows, const std::vector<int>& labels,
                       const Eigen::Ref<const RowMatrix>& centroids);

// Hubert-Arabie adjusted Rand index between two labelings of the same items.
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

}  // namespace cl3d
