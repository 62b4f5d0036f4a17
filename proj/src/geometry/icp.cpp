#include "cl3d/geometry/icp.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>
#include <cmath>
#include <numbers>

#include "cl3d/error.hpp"
#include "cl3d/geometry/kdtree.hpp"

namespace cl3d {

Points RigidTransform::apply(const Eigen::Ref<const Points>& points) const {
  Points out = points * rotation.transpose();
  out.rowwise() += translation.transpose();
  return out;
}

RigidTransform RigidTransform::operator*(const RigidTransform& other) const {
  return {rotation * other.rotation, rotation * other.translation + translation};
}

RigidTransform RigidTransform::inverse() const {
  const Eigen::Matrix3d rt = rotation.transpose();
  return {rt, -rt * translation};
}

RigidTransform fit_rigid(const Eigen::Ref<const Points>& src, const Eigen::Ref<const Points>& dst) {
  const Eigen::RowVector3d src_mean = src.colwise().mean();
  const Eigen::RowVector3d dst_mean = dst.colwise().mean();
  const Eigen::Matrix3d cov = (src.rowwise() - src_mean).transpose() * (dst.rowwise() - dst_mean);
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d s = svd.singularValues();
  if (!(s[0] > 0.0) || s[1] <= 1e-12 * s[0]) throw NumericalError("registration degenerate");
  // cov = U S V^T; R = V D U^T with D fixing a reflection.
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  RigidTransform t;
  t.rotation = svd.matrixV() * d * svd.matrixU().transpose();
  t.translation = dst_mean.transpose() - t.rotation * src_mean.transpose();
  return t;
}

namespace {

double match(const KdTree& tree, const Points& moved, Points& matched) {
  double sum_sq = 0.0;
  for (Eigen::Index i = 0; i < moved.rows(); ++i) {
    const Neighbor n = tree.nearest(moved.row(i).transpose());
    matched.row(i) = tree.points().row(n.index);
    sum_sq += n.distance * n.distance;
  }
  return std::sqrt(sum_sq / static_cast<double>(moved.rows()));
}

IcpResult run_icp(const Points& source, const KdTree& tree, const RigidTransform& start, const IcpOptions& options) {
  IcpResult result;
  result.transform = start;
  Points matched(source.rows(), 3);
  Points moved = start.apply(source);
  double rmse = match(tree, moved, matched);
  result.rmse_history.push_back(rmse);
  for (int iter = 0; iter < options.max_iters && rmse > 0.0; ++iter) {
    const RigidTransform candidate = fit_rigid(source, matched);
    Points candidate_matched(source.rows(), 3);
    const Points candidate_moved = candidate.apply(source);
    const double candidate_rmse = match(tree, candidate_moved, candidate_matched);
    ++result.iterations;
    // Exact arithmetic never increases rmse here; rounding can, by ulps, near convergence.
    if (candidate_rmse > rmse) break;
    const double improvement = rmse - candidate_rmse;
    result.transform = candidate;
    matched = std::move(candidate_matched);
    rmse = candidate_rmse;
    result.rmse_history.push_back(rmse);
    if (improvement < options.tol) break;
  }
  result.rmse = rmse;
  return result;
}

}  // namespace

IcpResult icp_register(const Points& source, const Points& target, const IcpOptions& options) {
  if (options.max_iters < 1) throw ConfigError("icp: max_iters must be >= 1");
  if (!(options.tol > 0.0)) throw ConfigError("icp: tol must be > 0");
  if (source.rows() == 0 || target.rows() == 0) throw DataError("icp: empty cloud");
  const KdTree tree(target);
  IcpResult best = run_icp(source, tree, RigidTransform::identity(), options);
  if (options.z_restarts) {
    for (int quarter = 1; quarter < 4; ++quarter) {
      RigidTransform start;
      start.rotation = Eigen::AngleAxisd(quarter * std::numbers::pi / 2.0, Eigen::Vector3d::UnitZ()).toRotationMatrix();
      IcpResult candidate = run_icp(source, tree, start, options);
      if (candidate.rmse < best.rmse) best = std::move(candidate);
    }
  }
  return best;
}

}  // namespace cl3d
