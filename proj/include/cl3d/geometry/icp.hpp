#pragma once

#include <Eigen/Core>
#include <vector>

#include "cl3d/core/point_cloud.hpp"

namespace cl3d {

// x -> rotation * x + translation, rotation proper (det = +1).
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidTransform identity() { return {}; }

  Points apply(const Eigen::Ref<const Points>& points) const;
  // (a * b)(x) = a(b(x))
  RigidTransform operator*(const RigidTransform& other) const;
  RigidTransform inverse() const;
};

struct IcpOptions {
  int max_iters = 50;
  double tol = 1e-7;
  // Also start from 90, 180 and 270 degree turns about z and keep the lowest rmse.
  bool z_restarts = false;
};

struct IcpResult {
  RigidTransform transform;  // maps source toward target
  double rmse = 0.0;
  // rmse after each correspondence step of the winning start, non-increasing.
  std::vector<double> rmse_history;
  int iterations = 0;
};

// Least-squares rigid fit mapping src rows onto dst rows (Kabsch with
// reflection correction). Throws NumericalError("registration degenerate")
// when the cross-covariance has rank < 2.
RigidTransform fit_rigid(const Eigen::Ref<const Points>& src, const Eigen::Ref<const Points>& dst);

// Point-to-point ICP. Stops after max_iters or when the rmse improves by less
// than tol. Throws ConfigError on invalid options.
IcpResult icp_register(const Points& source, const Points& target, const IcpOptions& options = {});

}  // namespace cl3d
