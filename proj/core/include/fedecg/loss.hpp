#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include "fedecg/error.hpp"
#include "fedecg/layers.hpp"
#include "fedecg/tensor.hpp"

namespace fedecg::nn {

enum class ReconstructionMode { kMse, kMae };

inline constexpr double kProbabilityFloor = 1e-12;

/// -log(probs[true_class] + 1e-12).
template <typename T>
T cross_entropy(const BasicTensor<T>& probs, std::size_t true_class) {
  require(true_class < probs.size(), ErrorCode::kInvalidArgument,
          "class index " + std::to_string(true_class) + " out of range for " + std::to_string(probs.size()) +
              " classes");
  return -std::log(probs[true_class] + static_cast<T>(kProbabilityFloor));
}

/// Gradient of cross_entropy(softmax(z)) with respect to the logits z: probs - onehot.
template <typename T>
BasicTensor<T> softmax_cross_entropy_grad(const BasicTensor<T>& probs, std::size_t true_class) {
  require(true_class < probs.size(), ErrorCode::kInvalidArgument, "class index out of range");
  BasicTensor<T> grad = probs;
  grad[true_class] -= T{1};
  return grad;
}

template <typename T>
T reconstruction_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target, ReconstructionMode mode) {
  require(pred.shape() == target.shape(), ErrorCode::kShapeMismatch,
          "reconstruction loss shapes differ: " + shape_to_string(pred.shape()) + " vs " +
              shape_to_string(target.shape()));
  double acc = 0.0;
  for (std::size_t j = 0; j < pred.size(); ++j) {
    const double d = static_cast<double>(pred[j]) - static_cast<double>(target[j]);
    acc += mode == ReconstructionMode::kMse ? d * d : std::abs(d);
  }
  return static_cast<T>(acc / static_cast<double>(pred.size()));
}

/// d/dpred of the mean squared error: 2 (pred - target) / n.
template <typename T>
BasicTensor<T> mse_grad(const BasicTensor<T>& pred, const BasicTensor<T>& target) {
  require(pred.shape() == target.shape(), ErrorCode::kShapeMismatch, "mse gradient shapes differ");
  BasicTensor<T> grad(pred.shape());
  const T scale = T{2} / static_cast<T>(pred.size());
  for (std::size_t j = 0; j < pred.size(); ++j) grad[j] = scale * (pred[j] - target[j]);
  return grad;
}

}  // namespace fedecg::nn
