#include "cl3d/neural/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cl3d/error.hpp"
#include "cl3d/random.hpp"

namespace cl3d {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("train: Adam betas must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("train: epsilon must be > 0");
  if (feature_width < 1) throw ConfigError("train: feature_width must be >= 1");
  loss.validate();
}

double cosine_learning_rate(double base, int epoch, int epochs) {
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * epoch / epochs));
}

Adam::Adam(const PointNet& model, const TrainConfig& config)
    : beta1_(config.beta1), beta2_(config.beta2), epsilon_(config.epsilon),
      m_(model.zeros_like()), v_(model.zeros_like()) {}

void Adam::step(PointNet& model, const PointNet::Tensors& gradients, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto& params = model.parameters();
  for (int i = 0; i < PointNet::kTensorCount; ++i) {
    auto& m = m_[i];
    auto& v = v_[i];
    if (m.rows() != params[i].rows() || m.cols() != params[i].cols()) {
      // The head grew: keep the moments of existing entries.
      RowMatrix grown_m = RowMatrix::Zero(params[i].rows(), params[i].cols());
      RowMatrix grown_v = grown_m;
      grown_m.topLeftCorner(m.rows(), m.cols()) = m;
      grown_v.topLeftCorner(v.rows(), v.cols()) = v;
      m = std::move(grown_m);
      v = std::move(grown_v);
    }
    const RowMatrix& g = gradients[i];
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    params[i].array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + epsilon_);
  }
}

TrainLog train_stage(PointNet& model, std::span<const TrainingExample> pool, const PointNet* old_model,
                     const TrainConfig& config, std::uint64_t seed) {
  config.validate();
  if (pool.empty()) throw DataError("train_stage: empty training set");
  const int classes = model.num_classes();
  std::vector<int> targets;
  targets.reserve(pool.size());
  for (const auto& ex : pool) {
    if (ex.target < 0 || ex.target >= classes)
      throw DataError("train_stage: target " + std::to_string(ex.target) + " exceeds the classifier head");
    targets.push_back(ex.target);
  }
  const std::vector<double> alphas = class_alphas(targets, classes, config.loss.alpha);
  const bool distill = old_model != nullptr && config.loss.distill_weight > 0.0;
  if (old_model && old_model->num_classes() > classes)
    throw DataError("train_stage: old model has more classes than the new one");

  // The old model is frozen, so its logits are computed once.
  RowMatrix old_logits;
  if (distill) {
    std::vector<const Points*> clouds;
    for (const auto& ex : pool) clouds.push_back(ex.points);
    old_logits.resize(static_cast<Eigen::Index>(pool.size()), old_model->num_classes());
    for (std::size_t lo = 0; lo < clouds.size(); lo += 64) {
      const std::size_t hi = std::min(clouds.size(), lo + 64);
      const BatchTrace tr = old_model->forward_batch(std::span(clouds).subspan(lo, hi - lo));
      old_logits.middleRows(static_cast<Eigen::Index>(lo), static_cast<Eigen::Index>(hi - lo)) = tr.logits;
    }
  }

  Adam adam(model, config);
  Rng rng(seed);
  std::vector<std::size_t> order(pool.size());
  TrainLog log;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = cosine_learning_rate(config.learning_rate, epoch, config.epochs);
    log.learning_rates.push_back(lr);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);

    double loss_sum = 0.0, distill_sum = 0.0;
    std::vector<const Points*> clouds;
    for (std::size_t lo = 0; lo < order.size(); lo += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t hi = std::min(order.size(), lo + static_cast<std::size_t>(config.batch_size));
      clouds.clear();
      for (std::size_t i = lo; i < hi; ++i) clouds.push_back(pool[order[i]].points);
      const BatchTrace tr = model.forward_batch(clouds);
      const auto batch = static_cast<Eigen::Index>(hi - lo);
      RowMatrix dlogits(batch, classes);
      for (Eigen::Index b = 0; b < batch; ++b) {
        const std::size_t idx = order[lo + static_cast<std::size_t>(b)];
        const int target = pool[idx].target;
        LossValue focal = focal_loss(tr.logits.row(b), target, config.loss.gamma,
                                     alphas[static_cast<std::size_t>(target)]);
        double total = focal.value;
        if (distill) {
          const LossValue kd = distill_loss(old_logits.row(static_cast<Eigen::Index>(idx)), tr.logits.row(b),
                                            config.loss.distill_temperature);
          total += config.loss.distill_weight * kd.value;
          focal.gradient += config.loss.distill_weight * kd.gradient;
          distill_sum += kd.value;
        }
        loss_sum += total;
        dlogits.row(b) = focal.gradient / static_cast<double>(batch);
      }
      adam.step(model, model.backward(tr, dlogits), lr);
    }
    if (!model.all_finite()) throw NumericalError("train_stage: parameters diverged at epoch " + std::to_string(epoch));
    log.epoch_loss.push_back(loss_sum / static_cast<double>(pool.size()));
    log.epoch_distill.push_back(distill_sum / static_cast<double>(pool.size()));
  }
  return log;
}

std::vector<int> predict(const PointNet& model, std::span<const Points* const> clouds, int batch_size) {
  std::vector<int> out;
  out.reserve(clouds.size());
  const auto step = static_cast<std::size_t>(std::max(1, batch_size));
  for (std::size_t lo = 0; lo < clouds.size(); lo += step) {
    const std::size_t hi = std::min(clouds.size(), lo + step);
    const BatchTrace tr = model.forward_batch(clouds.subspan(lo, hi - lo));
    for (Eigen::Index b = 0; b < tr.logits.rows(); ++b) {
      Eigen::Index best = 0;
      for (Eigen::Index c = 1; c < tr.logits.cols(); ++c)
        if (tr.logits(b, c) > tr.logits(b, best)) best = c;
      out.push_back(static_cast<int>(best));
    }
  }
  return out;
}

double evaluate(const PointNet& model, std::span<const TrainingExample> examples, int batch_size) {
  if (examples.empty()) throw DataError("evaluate: empty test set");
  std::vector<const Points*> clouds;
  clouds.reserve(examples.size());
  for (const auto& ex : examples) clouds.push_back(ex.points);
  const std::vector<int> predicted = predict(model, clouds, batch_size);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < examples.size(); ++i) correct += predicted[i] == examples[i].target;
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

}  // namespace cl3d
