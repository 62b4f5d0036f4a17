#include "cl3d/clustering/kmeans.hpp"

#include <limits>
#include <map>
#include <string>

#include "cl3d/error.hpp"
#include "cl3d/random.hpp"

namespace cl3d {
namespace {

double squared_row_distance(const Eigen::Ref<const RowMatrix>& a, Eigen::Index i, const RowMatrix& b,
                            Eigen::Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

RowMatrix seed_plus_plus(const Eigen::Ref<const RowMatrix>& rows, int k, Rng& rng) {
  const Eigen::Index n = rows.rows();
  RowMatrix centroids(k, rows.cols());
  std::vector<char> chosen(static_cast<std::size_t>(n), 0);
  Eigen::Index first = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(n)));
  centroids.row(0) = rows.row(first);
  chosen[static_cast<std::size_t>(first)] = 1;
  std::vector<double> nearest(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) nearest[static_cast<std::size_t>(i)] = squared_row_distance(rows, i, centroids, 0);

  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (double d : nearest) total += d;
    Eigen::Index pick = -1;
    if (total > 0.0) {
      pick = static_cast<Eigen::Index>(rng.categorical(nearest));
    } else {
      // Every remaining row duplicates a centroid; take the first unused one.
      for (Eigen::Index i = 0; i < n && pick < 0; ++i)
        if (!chosen[static_cast<std::size_t>(i)]) pick = i;
    }
    centroids.row(c) = rows.row(pick);
    chosen[static_cast<std::size_t>(pick)] = 1;
    for (Eigen::Index i = 0; i < n; ++i) {
      auto& d = nearest[static_cast<std::size_t>(i)];
      d = std::min(d, squared_row_distance(rows, i, centroids, c));
    }
  }
  return centroids;
}

std::vector<int> assign(const Eigen::Ref<const RowMatrix>& rows, const RowMatrix& centroids) {
  std::vector<int> labels(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    int best = 0;
    double best_d = squared_row_distance(rows, i, centroids, 0);
    for (Eigen::Index c = 1; c < centroids.rows(); ++c) {
      const double d = squared_row_distance(rows, i, centroids, c);
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    labels[static_cast<std::size_t>(i)] = best;
  }
  return labels;
}

// Gives every empty cluster the point farthest from its current centroid,
// drawn from clusters that can spare one.
void repair_empty(const Eigen::Ref<const RowMatrix>& rows, std::vector<int>& labels, RowMatrix& centroids) {
  const int k = static_cast<int>(centroids.rows());
  std::vector<int> sizes(static_cast<std::size_t>(k), 0);
  for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
  for (int c = 0; c < k; ++c) {
    if (sizes[static_cast<std::size_t>(c)] > 0) continue;
    Eigen::Index far = -1;
    double far_d = -1.0;
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
      const int l = labels[static_cast<std::size_t>(i)];
      if (sizes[static_cast<std::size_t>(l)] < 2) continue;
      const double d = squared_row_distance(rows, i, centroids, l);
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    if (far < 0) throw NumericalError("k-means: cannot repair empty cluster");
    --sizes[static_cast<std::size_t>(labels[static_cast<std::size_t>(far)])];
    labels[static_cast<std::size_t>(far)] = c;
    sizes[static_cast<std::size_t>(c)] = 1;
    centroids.row(c) = rows.row(far);
  }
}

RowMatrix cluster_means(const Eigen::Ref<const RowMatrix>& rows, const std::vector<int>& labels, int k) {
  RowMatrix sums = RowMatrix::Zero(k, rows.cols());
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const int l = labels[static_cast<std::size_t>(i)];
    sums.row(l) += rows.row(i);
    ++counts[static_cast<std::size_t>(l)];
  }
  for (int c = 0; c < k; ++c) sums.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
  return sums;
}

ClusterAssignment lloyd(const Eigen::Ref<const RowMatrix>& rows, int k, int max_iters, Rng& rng) {
  ClusterAssignment result;
  RowMatrix centroids = seed_plus_plus(rows, k, rng);
  std::vector<int> labels = assign(rows, centroids);
  repair_empty(rows, labels, centroids);
  result.inertia_trace.push_back(compute_inertia(rows, labels, centroids));

  bool converged = false;
  for (int iter = 1; iter <= max_iters; ++iter) {
    centroids = cluster_means(rows, labels, k);
    result.inertia_trace.push_back(compute_inertia(rows, labels, centroids));
    std::vector<int> next = assign(rows, centroids);
    repair_empty(rows, next, centroids);
    result.iterations = iter;
    if (next == labels) {
      converged = true;
      break;
    }
    labels = std::move(next);
    result.inertia_trace.push_back(compute_inertia(rows, labels, centroids));
  }
  if (!converged) {
    centroids = cluster_means(rows, labels, k);
    result.inertia_trace.push_back(compute_inertia(rows, labels, centroids));
  }
  result.inertia = compute_inertia(rows, labels, centroids);
  result.labels = std::move(labels);
  result.centroids = std::move(centroids);
  return result;
}

}  // namespace

double compute_inertia(const Eigen::Ref<const RowMatrix>& rows, const std::vector<int>& labels,
                       const Eigen::Ref<const RowMatrix>& centroids) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < rows.rows(); ++i)
    total += (rows.row(i) - centroids.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
  return total;
}

ClusterAssignment kmeans(const Eigen::Ref<const RowMatrix>& rows, int k, const KMeansOptions& options) {
  if (k < 1 || k > rows.rows())
    throw ConfigError("k-means: need 1 <= K <= L, got K=" + std::to_string(k) + ", L=" + std::to_string(rows.rows()));
  if (!rows.allFinite()) throw NumericalError("k-means: rows contain non-finite values");
  if (options.restarts < 1 || options.max_iters < 1) throw ConfigError("k-means: restarts and max_iters must be >= 1");
  ClusterAssignment best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < options.restarts; ++r) {
    Rng rng(derive_seed(options.seed, static_cast<std::uint64_t>(r)));
    ClusterAssignment candidate = lloyd(rows, k, options.max_iters, rng);
    if (candidate.inertia < best.inertia) best = std::move(candidate);
  }
  return best;
}

std::vector<Eigen::Index> nearest_to_centroid(const Eigen::Ref<const RowMatrix>& rows,
                                              const ClusterAssignment& assignment) {
  if (static_cast<Eigen::Index>(assignment.labels.size()) != rows.rows())
    throw DataError("nearest_to_centroid: assignment does not match rows");
  const int k = assignment.clusters();
  std::vector<Eigen::Index> picks(static_cast<std::size_t>(k), -1);
  std::vector<double> best(static_cast<std::size_t>(k), std::numeric_limits<double>::infinity());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const auto c = static_cast<std::size_t>(assignment.labels[static_cast<std::size_t>(i)]);
    const double d = (rows.row(i) - assignment.centroids.row(static_cast<Eigen::Index>(c))).squaredNorm();
    if (d < best[c]) {
      best[c] = d;
      picks[c] = i;
    }
  }
  for (int c = 0; c < k; ++c)
    if (picks[static_cast<std::size_t>(c)] < 0) throw NumericalError("nearest_to_centroid: empty cluster " + std::to_string(c));
  return picks;
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw DataError("adjusted_rand_index: labelings differ in length");
  const double n = static_cast<double>(a.size());
  if (a.size() < 2) return 1.0;
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> rows, cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  auto pairs = [](double x) { return x * (x - 1.0) / 2.0; };
  double index = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& [_, count] : joint) index += pairs(count);
  for (const auto& [_, count] : rows) sum_a += pairs(count);
  for (const auto& [_, count] : cols) sum_b += pairs(count);
  const double expected = sum_a * sum_b / pairs(n);
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

}  // namespace cl3d
