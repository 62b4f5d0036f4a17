#include "cl3d/core/point_cloud.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cl3d/error.hpp"

namespace cl3d {

PointCloud::PointCloud(Points points, std::string sample_id)
    : points_(std::move(points)), id_(std::move(sample_id)) {
  if (points_.rows() == 0) throw DataError("point cloud '" + id_ + "' is empty");
  if (!points_.allFinite()) throw DataError("point cloud '" + id_ + "' has non-finite coordinates");
}

Points normalize(const Eigen::Ref<const Points>& points) {
  if (points.rows() == 0) throw DataError("cannot normalize an empty cloud");
  const Eigen::RowVector3d centroid = points.colwise().mean();
  Points centered = points.rowwise() - centroid;
  const double max_norm = centered.rowwise().norm().maxCoeff();
  if (!(max_norm > 0.0)) throw DataError("cannot normalize a degenerate cloud (all points identical)");
  centered /= max_norm;
  return centered;
}

PointCloud normalize(const PointCloud& cloud) { return PointCloud(normalize(cloud.points()), cloud.id()); }

Points read_xyz(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::vector<double> coords;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    std::string token;
    int count = 0;
    double xyz[3];
    while (fields >> token) {
      if (count == 3) throw ParseError(line_no, "expected 3 coordinates in '" + path.string() + "'");
      const char* begin = token.data();
      const char* end = begin + token.size();
      auto [ptr, ec] = std::from_chars(begin, end, xyz[count]);
      if (ec != std::errc() || ptr != end)
        throw ParseError(line_no, "non-numeric token '" + token + "' in '" + path.string() + "'");
      ++count;
    }
    if (count == 0) continue;
    if (count != 3) throw ParseError(line_no, "expected 3 coordinates in '" + path.string() + "'");
    coords.insert(coords.end(), xyz, xyz + 3);
  }
  Points points(static_cast<Eigen::Index>(coords.size() / 3), 3);
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    for (int d = 0; d < 3; ++d) points(i, d) = coords[static_cast<std::size_t>(3 * i + d)];
  return points;
}

void write_xyz(const std::filesystem::path& path, const Eigen::Ref<const Points>& points) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  char buf[96];
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", points(i, 0), points(i, 1), points(i, 2));
    out << buf;
  }
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

}  // namespace cl3d
