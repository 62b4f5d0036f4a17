#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "cl3d/core/point_cloud.hpp"
#include "cl3d/random.hpp"

namespace cl3d {

enum class Primitive { Sphere, Box, Torus, Cylinder };

std::string to_string(Primitive primitive);
Primitive primitive_from_string(const std::string& name);

// One generating mode of a class: a primitive surface stretched by `aspect`.
struct ShapeMode {
  Primitive primitive = Primitive::Sphere;
  Eigen::Vector3d aspect = Eigen::Vector3d::Ones();
  double weight = 1.0;
  // Torus tube radius relative to the ring radius; ignored otherwise.
  double tube = 0.3;
};

struct ClassSpec {
  std::string name;
  std::vector<ShapeMode> modes;
};

struct SyntheticOptions {
  std::size_t points = 1024;
  double noise = 0.01;          // per-coordinate Gaussian jitter before normalization
  double aspect_jitter = 0.1;   // per-axis relative scale perturbation, uniform in +/-
  bool rotate_z = false;        // random yaw per sample (produces unaligned data)
  bool balanced_modes = false;  // cycle through modes instead of sampling by weight
};

// Draws `count` normalized samples of one class. Each sample records the index
// of its generating mode. Deterministic per seed; throws ConfigError when the
// spec has no modes or count is zero.
std::vector<LabeledSample> generate_synthetic(const ClassSpec& spec, int label, std::size_t count,
                                              std::uint64_t seed, const SyntheticOptions& options,
                                              const std::string& id_prefix);

// Raw (unnormalized, noise-free) surface samples of a unit primitive.
Points sample_primitive(const ShapeMode& mode, std::size_t n, Rng& rng);

}  // namespace cl3d
