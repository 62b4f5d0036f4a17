#include "cl3d/neural/pointnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "cl3d/error.hpp"
#include "cl3d/random.hpp"

namespace cl3d {
namespace {

constexpr char kMagic[8] = {'C', 'L', '3', 'D', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

RowMatrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
  RowMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
  return m;
}

void add_bias_relu(RowMatrix& pre, const RowMatrix& bias, RowMatrix* activated) {
  pre.rowwise() += bias.row(0);
  if (activated) *activated = pre.cwiseMax(0.0);
}

RowMatrix relu_mask(const RowMatrix& upstream, const RowMatrix& pre) {
  return (pre.array() > 0.0).select(upstream, 0.0);
}

RowMatrix column_sums(const RowMatrix& m) { return m.colwise().sum(); }

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataError("checkpoint: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

void write_f64(std::ostream& out, double value) {
  std::uint64_t bits;
  std::memcpy(&bits, &value, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

double read_f64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw DataError("checkpoint: truncated file");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double value;
  std::memcpy(&value, &bits, 8);
  return value;
}

}  // namespace

const char* PointNet::tensor_name(int tensor) {
  static const char* names[kTensorCount] = {"mlp1.weight", "mlp1.bias", "mlp2.weight", "mlp2.bias",
                                            "mlp3.weight", "mlp3.bias", "fc1.weight",  "fc1.bias",
                                            "fc2.weight",  "fc2.bias"};
  return names[tensor];
}

PointNet::PointNet(const ModelShape& shape, std::uint64_t seed) : shape_(shape) {
  if (shape.hidden1 < 1 || shape.hidden2 < 1 || shape.feature_width < 1 || shape.classifier_hidden < 1 ||
      shape.num_classes < 1)
    throw ConfigError("model: all layer widths must be >= 1");
  Rng rng(seed);
  // Fan-in uniform bounds: He for layers followed by ReLU, LeCun otherwise.
  auto he = [](int fan_in) { return std::sqrt(6.0 / fan_in); };
  auto lecun = [](int fan_in) { return std::sqrt(3.0 / fan_in); };
  params_[W1] = uniform_matrix(3, shape.hidden1, he(3), rng);
  params_[W2] = uniform_matrix(shape.hidden1, shape.hidden2, he(shape.hidden1), rng);
  params_[W3] = uniform_matrix(shape.hidden2, shape.feature_width, lecun(shape.hidden2), rng);
  params_[W4] = uniform_matrix(shape.feature_width, shape.classifier_hidden, he(shape.feature_width), rng);
  params_[W5] = uniform_matrix(shape.classifier_hidden, shape.num_classes, lecun(shape.classifier_hidden), rng);
  params_[B1] = RowMatrix::Zero(1, shape.hidden1);
  params_[B2] = RowMatrix::Zero(1, shape.hidden2);
  params_[B3] = RowMatrix::Zero(1, shape.feature_width);
  params_[B4] = RowMatrix::Zero(1, shape.classifier_hidden);
  params_[B5] = RowMatrix::Zero(1, shape.num_classes);
}

PointNet::Tensors PointNet::zeros_like() const {
  Tensors zeros;
  for (int t = 0; t < kTensorCount; ++t) zeros[t] = RowMatrix::Zero(params_[t].rows(), params_[t].cols());
  return zeros;
}

std::size_t PointNet::parameter_count() const {
  std::size_t total = 0;
  for (const auto& p : params_) total += static_cast<std::size_t>(p.size());
  return total;
}

void PointNet::expand_classes(int num_classes) {
  if (num_classes < shape_.num_classes)
    throw ConfigError("model: cannot shrink classifier from " + std::to_string(shape_.num_classes) + " to " +
                      std::to_string(num_classes) + " classes");
  if (num_classes == shape_.num_classes) return;
  RowMatrix w = RowMatrix::Zero(shape_.classifier_hidden, num_classes);
  w.leftCols(shape_.num_classes) = params_[W5];
  RowMatrix b = RowMatrix::Zero(1, num_classes);
  b.leftCols(shape_.num_classes) = params_[B5];
  params_[W5] = std::move(w);
  params_[B5] = std::move(b);
  shape_.num_classes = num_classes;
}

bool PointNet::all_finite() const {
  return std::all_of(params_.begin(), params_.end(), [](const RowMatrix& p) { return p.allFinite(); });
}

void PointNet::check_shapes() const {
  const ModelShape& s = shape_;
  const std::array<std::pair<Eigen::Index, Eigen::Index>, kTensorCount> expected = {{
      {3, s.hidden1}, {1, s.hidden1}, {s.hidden1, s.hidden2}, {1, s.hidden2},
      {s.hidden2, s.feature_width}, {1, s.feature_width}, {s.feature_width, s.classifier_hidden},
      {1, s.classifier_hidden}, {s.classifier_hidden, s.num_classes}, {1, s.num_classes}}};
  for (int t = 0; t < kTensorCount; ++t)
    if (params_[t].rows() != expected[t].first || params_[t].cols() != expected[t].second)
      throw DataError(std::string("model: tensor ") + tensor_name(t) + " has the wrong shape");
}

BatchTrace PointNet::forward_batch(std::span<const Points* const> clouds) const {
  if (clouds.empty()) throw DataError("forward: empty batch");
  BatchTrace tr;
  const auto batch = static_cast<Eigen::Index>(clouds.size());
  tr.offsets.resize(clouds.size() + 1, 0);
  for (std::size_t b = 0; b < clouds.size(); ++b) {
    if (clouds[b]->rows() == 0) throw DataError("forward: empty point cloud");
    tr.offsets[b + 1] = tr.offsets[b] + clouds[b]->rows();
  }
  tr.input.resize(tr.offsets.back(), 3);
  for (std::size_t b = 0; b < clouds.size(); ++b)
    tr.input.middleRows(tr.offsets[b], clouds[b]->rows()) = *clouds[b];

  RowMatrix h1, h2;
  tr.pre1.noalias() = tr.input * params_[W1];
  add_bias_relu(tr.pre1, params_[B1], &h1);
  tr.pre2.noalias() = h1 * params_[W2];
  add_bias_relu(tr.pre2, params_[B2], &h2);
  tr.local.noalias() = h2 * params_[W3];
  add_bias_relu(tr.local, params_[B3], nullptr);

  const Eigen::Index f_width = shape_.feature_width;
  tr.global.resize(batch, f_width);
  tr.argmax.assign(static_cast<std::size_t>(batch * f_width), 0);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const Eigen::Index lo = tr.offsets[static_cast<std::size_t>(b)];
    const Eigen::Index hi = tr.offsets[static_cast<std::size_t>(b) + 1];
    auto best = tr.global.row(b);
    best = tr.local.row(lo);
    Eigen::Index* arg = &tr.argmax[static_cast<std::size_t>(b * f_width)];
    std::fill(arg, arg + f_width, lo);
    for (Eigen::Index r = lo + 1; r < hi; ++r) {
      const double* row = tr.local.row(r).data();
      for (Eigen::Index f = 0; f < f_width; ++f) {
        if (row[f] > best[f]) {
          best[f] = row[f];
          arg[f] = r;
        }
      }
    }
  }

  RowMatrix h4;
  tr.pre4.noalias() = tr.global * params_[W4];
  add_bias_relu(tr.pre4, params_[B4], &h4);
  tr.logits.noalias() = h4 * params_[W5];
  tr.logits.rowwise() += params_[B5].row(0);
  if (!tr.logits.allFinite() || !tr.local.allFinite())
    throw NumericalError("forward: non-finite activations");
  return tr;
}

ForwardTrace PointNet::forward(const Points& cloud) const {
  const Points* ptr = &cloud;
  BatchTrace tr = forward_batch(std::span<const Points* const>(&ptr, 1));
  ForwardTrace out;
  out.local = std::move(tr.local);
  out.global = tr.global.row(0);
  out.argmax = std::move(tr.argmax);
  out.logits = tr.logits.row(0);
  return out;
}

PointNet::Tensors PointNet::backward(const BatchTrace& tr, const Eigen::Ref<const RowMatrix>& dlogits) const {
  check_shapes();
  const Eigen::Index batch = tr.batch_size();
  if (dlogits.rows() != batch || dlogits.cols() != shape_.num_classes)
    throw DataError("backward: gradient shape does not match the batch");
  Tensors g;

  const RowMatrix h4 = tr.pre4.cwiseMax(0.0);
  g[W5].noalias() = h4.transpose() * dlogits;
  g[B5] = column_sums(dlogits);
  RowMatrix d4 = relu_mask(dlogits * params_[W5].transpose(), tr.pre4);
  g[W4].noalias() = tr.global.transpose() * d4;
  g[B4] = column_sums(d4);
  const RowMatrix dglobal = d4 * params_[W4].transpose();

  // Only the rows that won at least one max receive gradient, so the shared
  // MLP is back-propagated through those rows alone.
  const Eigen::Index f_width = shape_.feature_width;
  std::vector<Eigen::Index> active(tr.argmax);
  std::sort(active.begin(), active.end());
  active.erase(std::unique(active.begin(), active.end()), active.end());
  const auto m = static_cast<Eigen::Index>(active.size());
  RowMatrix dlocal = RowMatrix::Zero(m, f_width);
  for (Eigen::Index b = 0; b < batch; ++b)
    for (Eigen::Index f = 0; f < f_width; ++f) {
      const Eigen::Index r = tr.argmax_at(b, f);
      const auto pos = std::lower_bound(active.begin(), active.end(), r) - active.begin();
      dlocal(pos, f) += dglobal(b, f);
    }

  RowMatrix x(m, 3), pre1(m, shape_.hidden1), pre2(m, shape_.hidden2);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index r = active[static_cast<std::size_t>(i)];
    x.row(i) = tr.input.row(r);
    pre1.row(i) = tr.pre1.row(r);
    pre2.row(i) = tr.pre2.row(r);
  }
  const RowMatrix h2 = pre2.cwiseMax(0.0);
  g[W3].noalias() = h2.transpose() * dlocal;
  g[B3] = column_sums(dlocal);
  const RowMatrix d2 = relu_mask(dlocal * params_[W3].transpose(), pre2);
  const RowMatrix h1 = pre1.cwiseMax(0.0);
  g[W2].noalias() = h1.transpose() * d2;
  g[B2] = column_sums(d2);
  const RowMatrix d1 = relu_mask(d2 * params_[W2].transpose(), pre1);
  g[W1].noalias() = x.transpose() * d1;
  g[B1] = column_sums(d1);
  return g;
}

void write_checkpoint(const std::filesystem::path& path, const PointNet& model, const std::string& rng_state) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("checkpoint: cannot write '" + path.string() + "'");
    out.write(kMagic, sizeof kMagic);
    write_u32(out, kVersion);
    const ModelShape& s = model.shape_;
    for (int v : {s.hidden1, s.hidden2, s.feature_width, s.classifier_hidden, s.num_classes})
      write_u32(out, static_cast<std::uint32_t>(v));
    for (const auto& p : model.params_) {
      write_u32(out, static_cast<std::uint32_t>(p.rows()));
      write_u32(out, static_cast<std::uint32_t>(p.cols()));
      for (Eigen::Index i = 0; i < p.size(); ++i) write_f64(out, p.data()[i]);
    }
    write_u32(out, static_cast<std::uint32_t>(rng_state.size()));
    out.write(rng_state.data(), static_cast<std::streamsize>(rng_state.size()));
    if (!out) throw DataError("checkpoint: write failed for '" + path.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

PointNet read_checkpoint(const std::filesystem::path& path, std::string* rng_state) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open '" + path.string() + "'");
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw DataError("checkpoint: '" + path.string() + "' is not a checkpoint");
  const std::uint32_t version = read_u32(in);
  if (version != kVersion) throw DataError("checkpoint: unsupported version " + std::to_string(version));
  PointNet model;
  ModelShape& s = model.shape_;
  for (int* field : {&s.hidden1, &s.hidden2, &s.feature_width, &s.classifier_hidden, &s.num_classes})
    *field = static_cast<int>(read_u32(in));
  for (auto& p : model.params_) {
    const std::uint32_t rows = read_u32(in);
    const std::uint32_t cols = read_u32(in);
    if (static_cast<std::uint64_t>(rows) * cols > (1ull << 28)) throw DataError("checkpoint: tensor too large");
    p.resize(rows, cols);
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = read_f64(in);
  }
  model.check_shapes();
  const std::uint32_t len = read_u32(in);
  std::string state(len, '\0');
  if (len > 0 && !in.read(state.data(), len)) throw DataError("checkpoint: truncated file");
  if (rng_state) *rng_state = std::move(state);
  return model;
}

}  // namespace cl3d
