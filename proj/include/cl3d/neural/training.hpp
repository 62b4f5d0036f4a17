#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cl3d/neural/losses.hpp"
#include "cl3d/neural/pointnet.hpp"

namespace cl3d {

struct TrainConfig {
  int epochs = 20;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int feature_width = 64;
  LossConfig loss;

  void validate() const;
};

// Cosine annealing evaluated per epoch: lr * (1 + cos(pi * epoch / epochs)) / 2.
double cosine_learning_rate(double base, int epoch, int epochs);

class Adam {
 public:
  Adam(const PointNet& model, const TrainConfig& config);

  // One update with step size `lr`. Moment buffers follow head expansion.
  void step(PointNet& model, const PointNet::Tensors& gradients, double lr);
  long steps() const { return t_; }

 private:
  double beta1_, beta2_, epsilon_;
  long t_ = 0;
  PointNet::Tensors m_, v_;
};

// One training item: a cloud plus its output index in the model's head.
struct TrainingExample {
  const Points* points = nullptr;
  int target = 0;
};

struct TrainLog {
  std::vector<double> epoch_loss;     // mean total loss per epoch
  std::vector<double> epoch_distill;  // mean unweighted distillation term per epoch
  std::vector<double> learning_rates;
};

// Trains `model` on `pool` (new-task samples plus memory exemplars). When
// `old_model` is given, old-class logits of every pool sample are distilled
// into the new model. The head must already cover every target. Throws
// DataError on an empty pool.
TrainLog train_stage(PointNet& model, std::span<const TrainingExample> pool, const PointNet* old_model,
                     const TrainConfig& config, std::uint64_t seed);

// Argmax over all logits, lowest index on ties.
std::vector<int> predict(const PointNet& model, std::span<const Points* const> clouds, int batch_size = 64);

// Fraction of examples whose prediction equals the target. Throws DataError
// on an empty set.
double evaluate(const PointNet& model, std::span<const TrainingExample> examples, int batch_size = 64);

}  // namespace cl3d
