#include "cl3d/geometry/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cl3d/error.hpp"

namespace cl3d {

KdTree::KdTree(Points points, int leaf_size) : points_(std::move(points)), leaf_size_(std::max(1, leaf_size)) {
  if (points_.rows() == 0) throw DataError("cannot build a spatial index over an empty cloud");
  order_.resize(static_cast<std::size_t>(points_.rows()));
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(2 * order_.size() / static_cast<std::size_t>(leaf_size_) + 1);
  build(0, static_cast<int>(order_.size()));
}

int KdTree::build(int begin, int end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{-1, -1, 0, 0.0, begin, end});
  if (end - begin <= leaf_size_) return id;

  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = -lo;
  for (int i = begin; i < end; ++i) {
    const Eigen::Vector3d p = points_.row(order_[static_cast<std::size_t>(i)]).transpose();
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Eigen::Vector3d spread = hi - lo;
  int axis = 0;
  for (int d = 1; d < 3; ++d)
    if (spread[d] > spread[axis]) axis = d;
  if (spread[axis] == 0.0) return id;  // all points coincide: keep as one leaf

  const int mid = begin + (end - begin) / 2;
  auto first = order_.begin() + begin;
  std::nth_element(first, order_.begin() + mid, order_.begin() + end, [&](int a, int b) {
    const double ca = points_(a, axis), cb = points_(b, axis);
    return ca < cb || (ca == cb && a < b);
  });
  const double split = points_(order_[static_cast<std::size_t>(mid)], axis);
  const int left = build(begin, mid);
  const int right = build(mid, end);
  Node& node = nodes_[static_cast<std::size_t>(id)];
  node.left = left;
  node.right = right;
  node.axis = axis;
  node.split = split;
  return id;
}

void KdTree::search(int node_id, const Eigen::Vector3d& query, double& best_sq, Eigen::Index& best) const {
  const Node& node = nodes_[static_cast<std::size_t>(node_id)];
  if (node.left < 0) {
    for (int i = node.begin; i < node.end; ++i) {
      const int idx = order_[static_cast<std::size_t>(i)];
      const double d = squared_distance(query, points_.row(idx).transpose());
      if (d < best_sq || (d == best_sq && idx < best)) {
        best_sq = d;
        best = idx;
      }
    }
    return;
  }
  const double diff = query[node.axis] - node.split;
  const int near = diff < 0.0 ? node.left : node.right;
  const int far = diff < 0.0 ? node.right : node.left;
  search(near, query, best_sq, best);
  // Inclusive bound so equal-distance points with lower indices are still found.
  if (diff * diff <= best_sq) search(far, query, best_sq, best);
}

Neighbor KdTree::nearest(const Eigen::Vector3d& query) const {
  double best_sq = std::numeric_limits<double>::infinity();
  Eigen::Index best = std::numeric_limits<Eigen::Index>::max();
  search(0, query, best_sq, best);
  return {best, std::sqrt(best_sq)};
}

}  // namespace cl3d
