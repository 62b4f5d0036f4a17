#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace cl3d {

enum class AlphaMode { Uniform, InverseFrequency };

std::string to_string(AlphaMode mode);
AlphaMode alpha_mode_from_string(const std::string& name);

struct LossConfig {
  double gamma = 2.0;
  AlphaMode alpha = AlphaMode::InverseFrequency;
  double distill_weight = 0.1;
  double distill_temperature = 2.0;

  void validate() const;
};

struct LossValue {
  double value = 0.0;
  Eigen::RowVectorXd gradient;  // d value / d logits
};

// Numerically stable softmax and log-softmax.
Eigen::RowVectorXd softmax(const Eigen::Ref<const Eigen::RowVectorXd>& logits);
Eigen::RowVectorXd log_softmax(const Eigen::Ref<const Eigen::RowVectorXd>& logits);

// -alpha (1 - p_t)^gamma log p_t with p_t = softmax(logits)[label], clamped
// below at 1e-12 before the log.
LossValue focal_loss(const Eigen::Ref<const Eigen::RowVectorXd>& logits, int label, double gamma, double alpha = 1.0);

// KL(q || p) where q = softmax(old_logits / T) and p is the softmax of the
// first C_old entries of new_logits / T. The gradient spans all of new_logits
// and is zero past C_old.
LossValue distill_loss(const Eigen::Ref<const Eigen::RowVectorXd>& old_logits,
                       const Eigen::Ref<const Eigen::RowVectorXd>& new_logits, double temperature);

// Per-class alpha for a training pool: inverse class frequency normalized to
// mean 1 over the classes present, or all ones. Classes absent from the pool
// get weight 0 in inverse-frequency mode.
std::vector<double> class_alphas(const std::vector<int>& targets, int num_classes, AlphaMode mode);

}  // namespace cl3d
