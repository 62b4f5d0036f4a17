#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cl3d/core/point_cloud.hpp"

namespace cl3d {

struct ModelShape {
  int hidden1 = 64;
  int hidden2 = 128;
  int feature_width = 64;  // F: width of local and global features
  int classifier_hidden = 64;
  int num_classes = 1;     // C: grows when stages add classes

  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

// Everything a backward pass needs for one batch of clouds.
struct BatchTrace {
  std::vector<Eigen::Index> offsets;  // cloud b owns rows [offsets[b], offsets[b+1])
  RowMatrix input;                    // N x 3, all clouds stacked
  RowMatrix pre1, pre2;               // pre-activations of the shared MLP
  RowMatrix local;                    // N x F local features
  RowMatrix global;                   // B x F max-pooled features
  std::vector<Eigen::Index> argmax;   // B x F, row of `local` that won each max
  RowMatrix pre4;                     // B x classifier_hidden
  RowMatrix logits;                   // B x C

  Eigen::Index batch_size() const { return global.rows(); }
  Eigen::Index argmax_at(Eigen::Index b, Eigen::Index f) const {
    return argmax[static_cast<std::size_t>(b * global.cols() + f)];
  }
};

// Single-cloud view of a forward pass.
struct ForwardTrace {
  RowMatrix local;                   // n x F
  Eigen::RowVectorXd global;         // F
  std::vector<Eigen::Index> argmax;  // F entries, row index of each column max
  Eigen::RowVectorXd logits;         // C
};

// PointNet-style classifier without transform sub-networks:
//   shared MLP 3 -> h1 -> h2 -> F applied to every point (ReLU on the hidden
//   layers, linear output), column-wise max pooling to a global feature, then
//   an MLP F -> hc -> C (ReLU hidden).
class PointNet {
 public:
  enum Tensor { W1, B1, W2, B2, W3, B3, W4, B4, W5, B5, kTensorCount };
  using Tensors = std::array<RowMatrix, kTensorCount>;

  static const char* tensor_name(int tensor);

  PointNet() = default;
  // Weights drawn from a seeded uniform fan-in initialization, biases zero.
  PointNet(const ModelShape& shape, std::uint64_t seed);

  const ModelShape& shape() const { return shape_; }
  int num_classes() const { return shape_.num_classes; }
  int feature_width() const { return shape_.feature_width; }

  Tensors& parameters() { return params_; }
  const Tensors& parameters() const { return params_; }
  Tensors zeros_like() const;
  std::size_t parameter_count() const;

  // Grows the classifier output to `num_classes`; new columns start at zero so
  // existing logits are unchanged.
  void expand_classes(int num_classes);

  // Throws NumericalError on non-finite activations.
  BatchTrace forward_batch(std::span<const Points* const> clouds) const;
  ForwardTrace forward(const Points& cloud) const;

  // Parameter gradients for upstream gradient `dlogits` (B x C) of a loss
  // evaluated on `trace`. Max pooling routes each feature's gradient to its
  // argmax row only.
  Tensors backward(const BatchTrace& trace, const Eigen::Ref<const RowMatrix>& dlogits) const;

  bool all_finite() const;

 private:
  void check_shapes() const;

  ModelShape shape_;
  Tensors params_;

  friend void write_checkpoint(const std::filesystem::path&, const PointNet&, const std::string&);
  friend PointNet read_checkpoint(const std::filesystem::path&, std::string*);
};

// Versioned binary checkpoint: magic "CL3DCKPT", u32 version, u32 shape fields,
// each tensor as (u32 rows, u32 cols, f64 data row-major), then a
// length-prefixed RNG state string. Little-endian.
void write_checkpoint(const std::filesystem::path& path, const PointNet& model, const std::string& rng_state = {});
PointNet read_checkpoint(const std::filesystem::path& path, std::string* rng_state = nullptr);

}  // namespace cl3d
