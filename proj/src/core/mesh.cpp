#include "cl3d/core/mesh.hpp"

#include <algorithm>
#include <Eigen/Geometry>
#include <cmath>
#include <charconv>
#include <fstream>
#include <sstream>

#include "cl3d/error.hpp"
#include "cl3d/random.hpp"

namespace cl3d {
namespace {

class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}

  // Next line with content, comments stripped. Returns false at end of input.
  bool next(std::string_view& line) {
    while (pos_ < text_.size()) {
      const std::size_t end = std::min(text_.find('\n', pos_), text_.size());
      line = text_.substr(pos_, end - pos_);
      pos_ = end + 1;
      ++line_no_;
      if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      if (line.find_first_not_of(" \t\r") != std::string_view::npos) return true;
    }
    return false;
  }

  std::size_t line_no() const { return line_no_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_no_ = 0;
};

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) tokens.push_back(line.substr(i, j - i));
    i = j;
  }
  return tokens;
}

template <typename T>
T parse_number(std::string_view token, std::size_t line_no) {
  T value{};
  const char* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec != std::errc() || ptr != end)
    throw ParseError(line_no, "non-numeric token '" + std::string(token) + "'");
  return value;
}

}  // namespace

Mesh parse_off(std::string_view text) {
  LineReader reader(text);
  std::string_view line;
  if (!reader.next(line)) throw ParseError(reader.line_no(), "empty OFF file");

  auto tokens = split(line);
  if (tokens.empty() || tokens[0].substr(0, 3) != "OFF")
    throw ParseError(reader.line_no(), "missing OFF header");
  std::vector<std::string_view> counts;
  if (tokens[0].size() > 3) counts.push_back(tokens[0].substr(3));
  counts.insert(counts.end(), tokens.begin() + 1, tokens.end());
  if (counts.empty()) {
    if (!reader.next(line)) throw ParseError(reader.line_no(), "missing OFF counts line");
    counts = split(line);
  }
  if (counts.size() < 2) throw ParseError(reader.line_no(), "OFF counts line needs vertex and face counts");
  const auto num_vertices = parse_number<long long>(counts[0], reader.line_no());
  const auto num_faces = parse_number<long long>(counts[1], reader.line_no());
  if (num_vertices < 0 || num_faces < 0) throw ParseError(reader.line_no(), "negative element count");

  Mesh mesh;
  mesh.vertices.reserve(static_cast<std::size_t>(num_vertices));
  for (long long v = 0; v < num_vertices; ++v) {
    if (!reader.next(line))
      throw ParseError(reader.line_no(), "unexpected end of file: expected " + std::to_string(num_vertices) +
                                             " vertices, found " + std::to_string(v));
    const auto fields = split(line);
    if (fields.size() < 3) throw ParseError(reader.line_no(), "vertex needs 3 coordinates");
    Eigen::Vector3d p;
    for (int d = 0; d < 3; ++d) p[d] = parse_number<double>(fields[static_cast<std::size_t>(d)], reader.line_no());
    mesh.vertices.push_back(p);
  }

  mesh.face_count = static_cast<std::size_t>(num_faces);
  for (long long f = 0; f < num_faces; ++f) {
    if (!reader.next(line))
      throw ParseError(reader.line_no(), "unexpected end of file: expected " + std::to_string(num_faces) +
                                             " faces, found " + std::to_string(f));
    const auto fields = split(line);
    const auto corners = parse_number<long long>(fields[0], reader.line_no());
    if (corners < 3) throw ParseError(reader.line_no(), "face needs at least 3 vertices");
    if (static_cast<long long>(fields.size()) < corners + 1)
      throw ParseError(reader.line_no(), "face lists fewer indices than declared");
    std::vector<int> index(static_cast<std::size_t>(corners));
    for (long long c = 0; c < corners; ++c) {
      const auto idx = parse_number<long long>(fields[static_cast<std::size_t>(c + 1)], reader.line_no());
      if (idx < 0 || idx >= num_vertices)
        throw ParseError(reader.line_no(), "face index " + std::to_string(idx) + " out of range [0, " +
                                               std::to_string(num_vertices) + ")");
      index[static_cast<std::size_t>(c)] = static_cast<int>(idx);
    }
    for (std::size_t c = 1; c + 1 < index.size(); ++c) mesh.triangles.push_back({index[0], index[c], index[c + 1]});
  }
  return mesh;
}

Mesh read_off(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_off(buffer.str());
  } catch (const ParseError& e) {
    throw ParseError(e.line(), e.detail() + " in '" + path.string() + "'");
  }
}

double triangle_area(const Mesh& mesh, std::size_t triangle) {
  const auto& t = mesh.triangles[triangle];
  const Eigen::Vector3d& a = mesh.vertices[static_cast<std::size_t>(t[0])];
  const Eigen::Vector3d& b = mesh.vertices[static_cast<std::size_t>(t[1])];
  const Eigen::Vector3d& c = mesh.vertices[static_cast<std::size_t>(t[2])];
  return 0.5 * (b - a).cross(c - a).norm();
}

PointCloud sample_surface(const Mesh& mesh, std::size_t n, std::uint64_t seed, std::string sample_id) {
  if (n == 0) throw DataError("sample_surface: n must be >= 1");
  std::vector<double> cumulative(mesh.triangles.size());
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    total += triangle_area(mesh, t);
    cumulative[t] = total;
  }
  if (!(total > 0.0)) throw DataError("sample_surface: mesh has zero surface area");

  Rng rng(seed);
  Points points(static_cast<Eigen::Index>(n), 3);
  for (std::size_t i = 0; i < n; ++i) {
    const double pick = rng.uniform() * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    if (it == cumulative.end()) --it;
    const auto& tri = mesh.triangles[static_cast<std::size_t>(it - cumulative.begin())];
    const Eigen::Vector3d& a = mesh.vertices[static_cast<std::size_t>(tri[0])];
    const Eigen::Vector3d& b = mesh.vertices[static_cast<std::size_t>(tri[1])];
    const Eigen::Vector3d& c = mesh.vertices[static_cast<std::size_t>(tri[2])];
    const double r1 = std::sqrt(rng.uniform());
    const double r2 = rng.uniform();
    const Eigen::Vector3d p = (1.0 - r1) * a + r1 * (1.0 - r2) * b + r1 * r2 * c;
    points.row(static_cast<Eigen::Index>(i)) = p.transpose();
  }
  return PointCloud(std::move(points), std::move(sample_id));
}

}  // namespace cl3d
