#include "fedecg/optimizer.hpp"

#include <cmath>

#include "fedecg/error.hpp"

namespace fedecg {

double lr_schedule(int epoch, double current_lr) {
  require(epoch >= 1, ErrorCode::kInvalidArgument, "epochs are 1-based");
  if (epoch <= kWarmEpochs) return kWarmLearningRate;
  return current_lr * std::exp(-0.1);
}

RmsProp::RmsProp(const WeightBundle& params, RmsPropConfig config) : config_(config) {
  mean_square_.reserve(params.size());
  for (const auto& entry : params.entries()) mean_square_.emplace_back(entry.tensor.shape());
}

void RmsProp::step(WeightBundle& params, const WeightBundle& grads, const std::vector<bool>& trainable) {
  require(params.size() == mean_square_.size() && grads.size() == params.size() &&
              trainable.size() == params.size(),
          ErrorCode::kShapeMismatch, "optimizer state does not match the parameter bundle");
  const float rho = static_cast<float>(config_.rho);
  const float one_minus_rho = static_cast<float>(1.0 - config_.rho);
  const float eps = static_cast<float>(config_.epsilon);
  const float lr = static_cast<float>(learning_rate_);
  for (std::size_t e = 0; e < params.size(); ++e) {
    if (!trainable[e]) continue;
    auto p = params.entries()[e].tensor.values();
    auto g = grads.entries()[e].tensor.values();
    auto s = mean_square_[e].values();
    require(p.size() == g.size(), ErrorCode::kShapeMismatch, "gradient shape does not match parameter");
    for (std::size_t j = 0; j < p.size(); ++j) {
      s[j] = rho * s[j] + one_minus_rho * g[j] * g[j];
      p[j] -= lr * g[j] / (std::sqrt(s[j]) + eps);
    }
  }
}

}  // namespace fedecg
