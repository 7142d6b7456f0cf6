#pragma once

#include <vector>

#include "fedecg/bundle.hpp"

namespace fedecg {

inline constexpr double kWarmLearningRate = 0.01;
inline constexpr int kWarmEpochs = 40;

/// Autoencoder schedule: 0.01 through epoch 40, then decays by e^-0.1 per epoch.
double lr_schedule(int epoch, double current_lr);

struct RmsPropConfig {
  double rho = 0.9;
  double epsilon = 1e-8;
};

/// RMSProp: s <- rho s + (1 - rho) g^2 ; p <- p - lr g / (sqrt(s) + eps).
class RmsProp {
 public:
  explicit RmsProp(const WeightBundle& params, RmsPropConfig config = {});

  double learning_rate() const noexcept { return learning_rate_; }
  void set_learning_rate(double lr) noexcept { learning_rate_ = lr; }
  const RmsPropConfig& config() const noexcept { return config_; }
  const std::vector<Tensor>& accumulators() const noexcept { return mean_square_; }

  /// Updates entries whose flag in `trainable` is set; others stay byte-identical.
  void step(WeightBundle& params, const WeightBundle& grads, const std::vector<bool>& trainable);

 private:
  RmsPropConfig config_;
  double learning_rate_ = kWarmLearningRate;
  std::vector<Tensor> mean_square_;
};

}  // namespace fedecg
