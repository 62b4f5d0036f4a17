#pragma once

#include <doctest.h>

#include <filesystem>
#include <string>

#include "cl3d/core/point_cloud.hpp"
#include "cl3d/random.hpp"

namespace cl3d::test {

inline Points random_points(Eigen::Index n, Rng& rng, double scale = 1.0) {
  Points p(n, 3);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = scale * rng.normal();
  return p;
}

inline RowMatrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  RowMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("cl3d_" + tag + "_" + hex64(fnv1a64(tag + std::to_string(reinterpret_cast<std::uintptr_t>(this)))));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace cl3d::test
