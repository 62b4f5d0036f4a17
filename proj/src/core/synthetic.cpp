#include "cl3d/core/synthetic.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "cl3d/error.hpp"
#include "cl3d/random.hpp"

namespace cl3d {

std::string to_string(Primitive primitive) {
  switch (primitive) {
    case Primitive::Sphere: return "sphere";
    case Primitive::Box: return "box";
    case Primitive::Torus: return "torus";
    case Primitive::Cylinder: return "cylinder";
  }
  return "unknown";
}

Primitive primitive_from_string(const std::string& name) {
  if (name == "sphere") return Primitive::Sphere;
  if (name == "box") return Primitive::Box;
  if (name == "torus") return Primitive::Torus;
  if (name == "cylinder") return Primitive::Cylinder;
  throw ConfigError("unknown primitive '" + name + "'");
}

namespace {

Eigen::Vector3d sphere_point(Rng& rng) {
  Eigen::Vector3d v(rng.normal(), rng.normal(), rng.normal());
  while (v.squaredNorm() < 1e-24) v = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
  return v.normalized();
}

// Surface of [-1, 1]^3; faces drawn with equal probability since they have equal area.
Eigen::Vector3d box_point(Rng& rng) {
  const auto face = rng.uniform_index(6);
  const int axis = static_cast<int>(face / 2);
  Eigen::Vector3d p(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
  p[axis] = (face % 2 == 0) ? -1.0 : 1.0;
  return p;
}

// Ring radius 1 in the xy plane. Tube angle accepted with probability
// proportional to the local area element (1 + r cos v).
Eigen::Vector3d torus_point(double tube, Rng& rng) {
  const double u = rng.uniform(0.0, 2.0 * std::numbers::pi);
  double v = 0.0;
  do {
    v = rng.uniform(0.0, 2.0 * std::numbers::pi);
  } while (rng.uniform() * (1.0 + tube) > 1.0 + tube * std::cos(v));
  const double ring = 1.0 + tube * std::cos(v);
  return {ring * std::cos(u), ring * std::sin(u), tube * std::sin(v)};
}

// Radius 1, height 2, capped. Side area 4*pi, caps pi each.
Eigen::Vector3d cylinder_point(Rng& rng) {
  const double pick = rng.uniform() * 6.0;
  const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
  if (pick < 4.0) return {std::cos(theta), std::sin(theta), rng.uniform(-1.0, 1.0)};
  const double r = std::sqrt(rng.uniform());
  return {r * std::cos(theta), r * std::sin(theta), pick < 5.0 ? -1.0 : 1.0};
}

}  // namespace

Points sample_primitive(const ShapeMode& mode, std::size_t n, Rng& rng) {
  Points points(static_cast<Eigen::Index>(n), 3);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    Eigen::Vector3d p;
    switch (mode.primitive) {
      case Primitive::Sphere: p = sphere_point(rng); break;
      case Primitive::Box: p = box_point(rng); break;
      case Primitive::Torus: p = torus_point(mode.tube, rng); break;
      case Primitive::Cylinder: p = cylinder_point(rng); break;
    }
    points.row(i) = p.cwiseProduct(mode.aspect).transpose();
  }
  return points;
}

std::vector<LabeledSample> generate_synthetic(const ClassSpec& spec, int label, std::size_t count,
                                              std::uint64_t seed, const SyntheticOptions& options,
                                              const std::string& id_prefix) {
  if (spec.modes.empty()) throw ConfigError("class spec '" + spec.name + "' has no shape modes");
  if (count == 0) throw ConfigError("generate_synthetic: count must be >= 1");
  if (options.points == 0) throw ConfigError("generate_synthetic: points must be >= 1");
  std::vector<double> weights;
  for (const auto& m : spec.modes) weights.push_back(m.weight);

  std::vector<LabeledSample> samples;
  samples.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    Rng rng(derive_seed(seed, s));
    const std::size_t mode = options.balanced_modes ? s % spec.modes.size() : rng.categorical(weights);
    ShapeMode shape = spec.modes[mode];
    for (int d = 0; d < 3; ++d) shape.aspect[d] *= 1.0 + rng.uniform(-options.aspect_jitter, options.aspect_jitter);
    Points points = sample_primitive(shape, options.points, rng);
    if (options.rotate_z) {
      const double yaw = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const Eigen::Matrix3d r = Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();
      points = points * r.transpose();
    }
    if (options.noise > 0.0)
      for (Eigen::Index i = 0; i < points.rows(); ++i)
        for (int d = 0; d < 3; ++d) points(i, d) += options.noise * rng.normal();
    char index[32];
    std::snprintf(index, sizeof index, "%04zu", s);
    samples.push_back({PointCloud(normalize(points), id_prefix + index), label, static_cast<int>(mode)});
  }
  return samples;
}

}  // namespace cl3d
