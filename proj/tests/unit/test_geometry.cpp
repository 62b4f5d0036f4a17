#include <doctest.h>

#include <Eigen/Geometry>

#include "cl3d/affinity/chamfer.hpp"
#include "cl3d/error.hpp"
#include "cl3d/geometry/icp.hpp"
#include "cl3d/geometry/kdtree.hpp"
#include "helpers.hpp"

using namespace cl3d;

namespace {

Eigen::Matrix3d random_rotation(Rng& rng, double max_angle) {
  Eigen::Vector3d axis(rng.normal(), rng.normal(), rng.normal());
  return Eigen::AngleAxisd(rng.uniform(-max_angle, max_angle), axis.normalized()).toRotationMatrix();
}

}  // namespace

TEST_CASE("kd-tree nearest neighbour matches brute force") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Points data = test::random_points(1 + static_cast<Eigen::Index>(rng.uniform_index(300)), rng);
    const KdTree tree(data, 1 + static_cast<int>(rng.uniform_index(20)));
    for (int q = 0; q < 50; ++q) {
      const Eigen::RowVector3d query = test::random_points(1, rng, 1.5).row(0);
      Eigen::Index best = 0;
      double best_d = (data.row(0) - query).squaredNorm();
      for (Eigen::Index i = 1; i < data.rows(); ++i) {
        const double d = (data.row(i) - query).squaredNorm();
        if (d < best_d) best_d = d, best = i;
      }
      const Neighbor nn = tree.nearest(query);
      CHECK(nn.index == best);
      CHECK(nn.distance == doctest::Approx(std::sqrt(best_d)).epsilon(1e-14));
    }
  }
}

TEST_CASE("kd-tree breaks exact ties toward the lower index") {
  Points data(4, 3);
  data << 1, 0, 0, -1, 0, 0, 1, 0, 0, 0, 5, 0;
  const KdTree tree(data, 1);
  CHECK(tree.nearest(Eigen::RowVector3d(0, 0, 0)).index == 0);
  CHECK(tree.nearest(Eigen::RowVector3d(1, 0, 0)).index == 0);
}

TEST_CASE("rigid fit recovers a proper rotation") {
  Rng rng(2);
  const Points src = test::random_points(40, rng);
  const Eigen::Matrix3d r = random_rotation(rng, 3.0);
  const Eigen::RowVector3d t(0.3, -1.0, 2.0);
  const Points dst = (src * r.transpose()).rowwise() + t;
  const RigidTransform fit = fit_rigid(src, dst);
  CHECK((fit.rotation - r).norm() < 1e-10);
  CHECK(fit.rotation.determinant() == doctest::Approx(1.0));
  CHECK((fit.translation.transpose() - t).norm() < 1e-10);

  SUBCASE("a mirrored target still yields a rotation") {
    Points mirrored = src;
    mirrored.col(0) *= -1.0;
    CHECK(fit_rigid(src, mirrored).rotation.determinant() == doctest::Approx(1.0));
  }
  SUBCASE("collinear points are degenerate") {
    Points line(5, 3);
    for (int i = 0; i < 5; ++i) line.row(i) << i, 2.0 * i, 0.0;
    CHECK_THROWS_AS(fit_rigid(line, line), NumericalError);
  }
}

TEST_CASE("transform algebra") {
  Rng rng(5);
  RigidTransform a{random_rotation(rng, 1.0), Eigen::Vector3d(1, 2, 3)};
  RigidTransform b{random_rotation(rng, 1.0), Eigen::Vector3d(-1, 0, 4)};
  const Points p = test::random_points(10, rng);
  CHECK(((a * b).apply(p) - a.apply(b.apply(p))).norm() < 1e-12);
  CHECK((a.inverse().apply(a.apply(p)) - p).norm() < 1e-12);
}

TEST_CASE("ICP re-registers small rigid motions") {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    Points target = test::random_points(200, rng);
    target.col(0) *= 1.0;
    target.col(1) *= 0.6;
    target.col(2) *= 0.3;
    const Eigen::Matrix3d r = random_rotation(rng, 0.3);
    const Eigen::Vector3d t(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05));
    const Points source = RigidTransform{r, t}.apply(target);
    const IcpResult result = icp_register(source, target);
    CHECK(chamfer(result.transform.apply(source), target) < 1e-6);
    for (std::size_t i = 1; i < result.rmse_history.size(); ++i)
      CHECK(result.rmse_history[i] <= result.rmse_history[i - 1]);
  }
}

TEST_CASE("ICP on identical clouds is the identity") {
  Rng rng(3);
  const Points p = test::random_points(30, rng);
  const IcpResult r = icp_register(p, p);
  CHECK(r.rmse == 0.0);
  CHECK((r.transform.rotation - Eigen::Matrix3d::Identity()).norm() == 0.0);
}
