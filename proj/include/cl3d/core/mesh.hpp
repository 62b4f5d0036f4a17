#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cl3d/core/point_cloud.hpp"

namespace cl3d {

struct Mesh {
  std::vector<Eigen::Vector3d> vertices;
  // Polygons with more than three corners are fan-triangulated on load.
  std::vector<std::array<int, 3>> triangles;
  // Number of faces declared in the file header (before triangulation).
  std::size_t face_count = 0;
};

// Parses an OFF mesh. Accepts the header keyword on its own line or fused with
// the counts ("OFF490 518 0", as found in ModelNet40). Errors are ParseError
// carrying the offending line number.
Mesh parse_off(std::string_view text);
Mesh read_off(const std::filesystem::path& path);

double triangle_area(const Mesh& mesh, std::size_t triangle);

// Area-weighted uniform sampling of n surface points. Deterministic per seed.
// Throws DataError when n == 0 or the mesh has no area.
PointCloud sample_surface(const Mesh& mesh, std::size_t n, std::uint64_t seed,
                          std::string sample_id = {});

}  // namespace cl3d
