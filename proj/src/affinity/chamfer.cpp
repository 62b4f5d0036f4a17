#include "cl3d/affinity/chamfer.hpp"

#include <cmath>

#include "cl3d/error.hpp"

namespace cl3d {
namespace {

// Returns the sum of distances and fills the nearest indices.
double directed(const KdTree& from, const KdTree& to, std::vector<Eigen::Index>* indices) {
  const Points& pts = from.points();
  double sum = 0.0;
  if (indices) indices->resize(static_cast<std::size_t>(pts.rows()));
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    const Neighbor n = to.nearest(pts.row(i).transpose());
    sum += n.distance;
    if (indices) (*indices)[static_cast<std::size_t>(i)] = n.index;
  }
  return sum;
}

// Sequential accumulation, so 3-column rows reproduce squared_distance exactly.
double row_distance(const Eigen::Ref<const RowMatrix>& a, Eigen::Index i, const Eigen::Ref<const RowMatrix>& b,
                    Eigen::Index j) {
  const double* pa = a.row(i).data();
  const double* pb = b.row(j).data();
  double sum = 0.0;
  for (Eigen::Index f = 0; f < a.cols(); ++f) {
    const double d = pa[f] - pb[f];
    sum += d * d;
  }
  return std::sqrt(sum);
}

}  // namespace

NnMapping nn_mapping(const KdTree& x1, const KdTree& x2) {
  NnMapping mapping;
  directed(x1, x2, &mapping.forward);
  directed(x2, x1, &mapping.backward);
  return mapping;
}

NnMapping nn_mapping(const Points& x1, const Points& x2) { return nn_mapping(KdTree(x1), KdTree(x2)); }

double chamfer(const KdTree& x1, const KdTree& x2) {
  const double forward = directed(x1, x2, nullptr) / static_cast<double>(x1.size());
  const double backward = directed(x2, x1, nullptr) / static_cast<double>(x2.size());
  return forward + backward;
}

double chamfer(const Points& x1, const Points& x2) { return chamfer(KdTree(x1), KdTree(x2)); }

double chamfer_features(const Eigen::Ref<const RowMatrix>& z1, const Eigen::Ref<const RowMatrix>& z2,
                        const NnMapping& mapping) {
  if (static_cast<Eigen::Index>(mapping.forward.size()) != z1.rows() ||
      static_cast<Eigen::Index>(mapping.backward.size()) != z2.rows())
    throw DataError("chamfer_features: mapping does not match feature row counts");
  if (z1.cols() != z2.cols()) throw DataError("chamfer_features: feature widths differ");
  if (z1.rows() == 0 || z2.rows() == 0) throw DataError("chamfer_features: empty feature cloud");
  double forward = 0.0;
  for (Eigen::Index i = 0; i < z1.rows(); ++i) {
    const Eigen::Index j = mapping.forward[static_cast<std::size_t>(i)];
    if (j < 0 || j >= z2.rows()) throw DataError("chamfer_features: forward index out of range");
    forward += row_distance(z1, i, z2, j);
  }
  double backward = 0.0;
  for (Eigen::Index j = 0; j < z2.rows(); ++j) {
    const Eigen::Index i = mapping.backward[static_cast<std::size_t>(j)];
    if (i < 0 || i >= z1.rows()) throw DataError("chamfer_features: backward index out of range");
    backward += row_distance(z2, j, z1, i);
  }
  return forward / static_cast<double>(z1.rows()) + backward / static_cast<double>(z2.rows());
}

}  // namespace cl3d
