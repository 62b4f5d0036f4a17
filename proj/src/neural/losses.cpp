#include "cl3d/neural/losses.hpp"

#include <cmath>

#include "cl3d/error.hpp"

namespace cl3d {

std::string to_string(AlphaMode mode) {
  return mode == AlphaMode::Uniform ? "uniform" : "inverse_frequency";
}

AlphaMode alpha_mode_from_string(const std::string& name) {
  if (name == "uniform") return AlphaMode::Uniform;
  if (name == "inverse_frequency") return AlphaMode::InverseFrequency;
  throw ConfigError("unknown alpha mode '" + name + "' (expected uniform or inverse_frequency)");
}

void LossConfig::validate() const {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("loss: gamma must be finite and >= 0");
  if (!(distill_weight >= 0.0) || !std::isfinite(distill_weight))
    throw ConfigError("loss: distill_weight must be finite and >= 0");
  if (!(distill_temperature > 0.0)) throw ConfigError("loss: distill_temperature must be > 0");
}

Eigen::RowVectorXd log_softmax(const Eigen::Ref<const Eigen::RowVectorXd>& logits) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return logits.array() - lse;
}

Eigen::RowVectorXd softmax(const Eigen::Ref<const Eigen::RowVectorXd>& logits) {
  return log_softmax(logits).array().exp();
}

LossValue focal_loss(const Eigen::Ref<const Eigen::RowVectorXd>& logits, int label, double gamma, double alpha) {
  if (label < 0 || label >= logits.size())
    throw DataError("focal loss: label " + std::to_string(label) + " outside [0, " + std::to_string(logits.size()) + ")");
  const Eigen::RowVectorXd logp = log_softmax(logits);
  const Eigen::RowVectorXd p = logp.array().exp();
  const double log_pt = std::max(logp[label], std::log(1e-12));
  const double pt = std::exp(log_pt);
  const double rest = -std::expm1(log_pt);  // 1 - p_t without cancellation

  LossValue out;
  const double modulator = gamma == 0.0 ? 1.0 : std::pow(rest, gamma);
  out.value = -alpha * modulator * log_pt;
  double slope = 0.0;  // gamma (1 - p_t)^(gamma - 1) p_t log p_t
  if (gamma > 0.0 && rest > 0.0) slope = gamma * std::pow(rest, gamma - 1.0) * pt * log_pt;
  const double scale = alpha * (slope - modulator);
  out.gradient = -scale * p;
  out.gradient[label] += scale;
  return out;
}

LossValue distill_loss(const Eigen::Ref<const Eigen::RowVectorXd>& old_logits,
                       const Eigen::Ref<const Eigen::RowVectorXd>& new_logits, double temperature) {
  const Eigen::Index c_old = old_logits.size();
  if (c_old == 0 || c_old > new_logits.size())
    throw DataError("distillation: old logits must cover a nonempty prefix of the new logits");
  if (!(temperature > 0.0)) throw ConfigError("distillation: temperature must be > 0");
  const Eigen::RowVectorXd log_q = log_softmax(old_logits / temperature);
  const Eigen::RowVectorXd log_p = log_softmax(new_logits.head(c_old) / temperature);
  const Eigen::RowVectorXd q = log_q.array().exp();
  LossValue out;
  out.value = std::max(0.0, (q.array() * (log_q - log_p).array()).sum());
  out.gradient = Eigen::RowVectorXd::Zero(new_logits.size());
  out.gradient.head(c_old) = (log_p.array().exp() - q.array()) / temperature;
  return out;
}

std::vector<double> class_alphas(const std::vector<int>& targets, int num_classes, AlphaMode mode) {
  std::vector<double> alphas(static_cast<std::size_t>(num_classes), 1.0);
  if (mode == AlphaMode::Uniform) return alphas;
  std::vector<double> counts(static_cast<std::size_t>(num_classes), 0.0);
  for (int t : targets) {
    if (t < 0 || t >= num_classes) throw DataError("class_alphas: target out of range");
    counts[static_cast<std::size_t>(t)] += 1.0;
  }
  double sum = 0.0;
  int present = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    alphas[c] = counts[c] > 0.0 ? 1.0 / counts[c] : 0.0;
    if (counts[c] > 0.0) {
      sum += alphas[c];
      ++present;
    }
  }
  if (present == 0) return alphas;
  const double mean = sum / present;
  for (double& a : alphas) a /= mean;
  return alphas;
}

}  // namespace cl3d
