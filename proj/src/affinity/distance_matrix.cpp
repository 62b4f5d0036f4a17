#include "cl3d/affinity/distance_matrix.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "cl3d/affinity/chamfer.hpp"
#include "cl3d/error.hpp"
#include "cl3d/geometry/kdtree.hpp"
#include "cl3d/parallel.hpp"
#include "cl3d/random.hpp"

namespace cl3d {

std::string to_string(Metric metric) {
  switch (metric) {
    case Metric::Chamfer3d: return "chamfer3d";
    case Metric::ChamferFeatures: return "chamfer_features";
    case Metric::Euclidean: return "euclidean";
  }
  return "unknown";
}

DistanceMatrix::DistanceMatrix(Eigen::MatrixXd values, std::vector<std::string> ids)
    : values_(std::move(values)), ids_(std::move(ids)) {
  if (values_.rows() != values_.cols()) throw NumericalError("distance matrix must be square");
  if (static_cast<Eigen::Index>(ids_.size()) != values_.rows())
    throw NumericalError("distance matrix: id count does not match size");
  if (!values_.allFinite()) throw NumericalError("distance matrix has non-finite entries");
  for (Eigen::Index i = 0; i < values_.rows(); ++i) {
    if (values_(i, i) != 0.0) throw NumericalError("distance matrix has a nonzero diagonal");
    for (Eigen::Index j = 0; j < i; ++j) {
      if (values_(i, j) < 0.0) throw NumericalError("distance matrix has negative entries");
      if (std::abs(values_(i, j) - values_(j, i)) > 1e-9) throw NumericalError("distance matrix is not symmetric");
    }
  }
}

namespace {

std::vector<std::pair<Eigen::Index, Eigen::Index>> unordered_pairs(Eigen::Index n) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  pairs.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 1; i < n; ++i)
    for (Eigen::Index j = 0; j < i; ++j) pairs.emplace_back(i, j);
  return pairs;
}

template <typename PairFn>
Eigen::MatrixXd fill_pairs(Eigen::Index n, const std::vector<std::string>& ids, unsigned threads, PairFn&& fn) {
  if (n < 2) throw DataError("distance matrix needs at least 2 samples");
  if (static_cast<Eigen::Index>(ids.size()) != n) throw DataError("distance matrix: id count does not match samples");
  Eigen::MatrixXd values = Eigen::MatrixXd::Zero(n, n);
  const auto pairs = unordered_pairs(n);
  parallel_for(pairs.size(), threads, [&](std::size_t p) {
    const auto [i, j] = pairs[p];
    double d = 0.0;
    try {
      d = fn(i, j);
    } catch (const std::exception& e) {
      throw NumericalError("distance between '" + ids[static_cast<std::size_t>(i)] + "' and '" +
                           ids[static_cast<std::size_t>(j)] + "' failed: " + e.what());
    }
    if (!std::isfinite(d))
      throw NumericalError("distance between '" + ids[static_cast<std::size_t>(i)] + "' and '" +
                           ids[static_cast<std::size_t>(j)] + "' is not finite");
    values(i, j) = d;
    values(j, i) = d;
  });
  return values;
}

}  // namespace

DistanceMatrix chamfer_distance_matrix(std::span<const Points> clouds, std::vector<std::string> ids,
                                       unsigned threads) {
  std::vector<KdTree> trees;
  trees.reserve(clouds.size());
  for (const auto& c : clouds) trees.emplace_back(c);
  auto values = fill_pairs(static_cast<Eigen::Index>(clouds.size()), ids, threads, [&](Eigen::Index i, Eigen::Index j) {
    return chamfer(trees[static_cast<std::size_t>(i)], trees[static_cast<std::size_t>(j)]);
  });
  return DistanceMatrix(std::move(values), std::move(ids));
}

DistanceMatrix feature_chamfer_distance_matrix(std::span<const Points> clouds, std::span<const RowMatrix> features,
                                               std::vector<std::string> ids, unsigned threads) {
  if (clouds.size() != features.size()) throw DataError("feature chamfer: cloud and feature counts differ");
  for (std::size_t i = 0; i < clouds.size(); ++i)
    if (clouds[i].rows() != features[i].rows())
      throw DataError("feature chamfer: sample '" + (i < ids.size() ? ids[i] : std::to_string(i)) +
                      "' has " + std::to_string(features[i].rows()) + " feature rows for " +
                      std::to_string(clouds[i].rows()) + " points");
  std::vector<KdTree> trees;
  trees.reserve(clouds.size());
  for (const auto& c : clouds) trees.emplace_back(c);
  auto values = fill_pairs(static_cast<Eigen::Index>(clouds.size()), ids, threads, [&](Eigen::Index i, Eigen::Index j) {
    const auto a = static_cast<std::size_t>(i), b = static_cast<std::size_t>(j);
    return chamfer_features(features[a], features[b], nn_mapping(trees[a], trees[b]));
  });
  return DistanceMatrix(std::move(values), std::move(ids));
}

DistanceMatrix euclidean_distance_matrix(const Eigen::Ref<const RowMatrix>& rows, std::vector<std::string> ids) {
  auto values = fill_pairs(rows.rows(), ids, 1, [&](Eigen::Index i, Eigen::Index j) {
    return (rows.row(i) - rows.row(j)).norm();
  });
  return DistanceMatrix(std::move(values), std::move(ids));
}

namespace {

constexpr char kMagic[8] = {'C', 'L', '3', 'D', 'D', 'M', 'A', 'T'};
constexpr std::uint32_t kCacheVersion = 1;

template <typename T>
void put(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T)))
    throw DataError("distance cache '" + path.string() + "' is truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void write_distance_cache(const std::filesystem::path& path, const DistanceMatrix& matrix, Metric metric,
                          std::uint64_t settings_hash) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write distance cache '" + tmp.string() + "'");
    out.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kCacheVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(metric));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(matrix.size()));
    put<std::uint64_t>(out, settings_hash);
    for (Eigen::Index i = 1; i < matrix.size(); ++i)
      for (Eigen::Index j = 0; j < i; ++j) put<double>(out, matrix(i, j));
    if (!out) throw DataError("failed writing distance cache '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

CachedDistances read_distance_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open distance cache '" + path.string() + "'");
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw DataError("'" + path.string() + "' is not a distance cache file");
  if (get<std::uint32_t>(in, path) != kCacheVersion)
    throw DataError("distance cache '" + path.string() + "' has an unsupported version");
  CachedDistances cached;
  cached.metric = static_cast<Metric>(get<std::uint32_t>(in, path));
  const auto n = static_cast<Eigen::Index>(get<std::uint64_t>(in, path));
  cached.settings_hash = get<std::uint64_t>(in, path);
  if (n < 0 || n > (1 << 20)) throw DataError("distance cache '" + path.string() + "' has an implausible size");
  cached.values = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 1; i < n; ++i)
    for (Eigen::Index j = 0; j < i; ++j) {
      const double d = get<double>(in, path);
      cached.values(i, j) = d;
      cached.values(j, i) = d;
    }
  return cached;
}

std::uint64_t DistanceCache::key(const std::string& dataset, const std::string& class_name, Metric metric,
                                 const std::string& settings, const std::vector<std::string>& ids) {
  std::string text = dataset + '\x1f' + class_name + '\x1f' + to_string(metric) + '\x1f' + settings;
  for (const auto& id : ids) text += '\x1e' + id;
  return fnv1a64(text);
}

std::filesystem::path DistanceCache::path_for(std::uint64_t key) const { return dir_ / (hex64(key) + ".dmat"); }

std::optional<DistanceMatrix> DistanceCache::load(std::uint64_t key, Metric metric,
                                                  const std::vector<std::string>& ids) const {
  const auto path = path_for(key);
  if (!std::filesystem::exists(path)) return std::nullopt;
  CachedDistances cached = read_distance_cache(path);
  if (cached.metric != metric || cached.settings_hash != key ||
      cached.values.rows() != static_cast<Eigen::Index>(ids.size()))
    return std::nullopt;
  return DistanceMatrix(std::move(cached.values), ids);
}

void DistanceCache::store(std::uint64_t key, Metric metric, const DistanceMatrix& matrix) const {
  write_distance_cache(path_for(key), matrix, metric, key);
}

AffinityMatrix knn_affinity(const DistanceMatrix& distances, int k) {
  const Eigen::Index n = distances.size();
  if (n < 2) throw DataError("knn_affinity needs at least 2 samples");
  if (k < 1) throw ConfigError("knn_affinity: k must be >= 1");
  const int effective = static_cast<int>(std::min<Eigen::Index>(k, n - 1));
  Eigen::MatrixXd directed = Eigen::MatrixXd::Zero(n, n);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::iota(order.begin(), order.end(), 0);
    order.erase(order.begin() + i);
    std::partial_sort(order.begin(), order.begin() + effective, order.end(), [&](Eigen::Index a, Eigen::Index b) {
      const double da = distances(i, a), db = distances(i, b);
      return da < db || (da == db && a < b);
    });
    for (int r = 0; r < effective; ++r) directed(i, order[static_cast<std::size_t>(r)]) = 1.0;
    order.resize(static_cast<std::size_t>(n));
  }
  AffinityMatrix affinity;
  affinity.values = 0.5 * (directed + directed.transpose());
  affinity.k = effective;
  return affinity;
}

}  // namespace cl3d
