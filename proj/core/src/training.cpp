#include "fedecg/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedecg/error.hpp"
#include "fedecg/loss.hpp"
#include "fedecg/optimizer.hpp"
#include "fedecg/random.hpp"

namespace fedecg {

namespace {

void scale(WeightBundle& grads, float factor) {
  for (auto& e : grads.entries()) {
    for (float& v : e.tensor.values()) v *= factor;
  }
}

// Generic minibatch loop. `sample_step` runs forward/backward for one record,
// accumulates into the gradient bundle and returns its loss.
template <typename SampleStep>
TrainStats run_epochs(Model& model, std::size_t n_records, const TrainConfig& config, SampleStep&& sample_step) {
  require(n_records > 0, ErrorCode::kInvalidArgument, "cannot train on an empty dataset");
  require(config.batch_size > 0, ErrorCode::kInvalidArgument, "batch size must be positive");
  TrainStats stats;
  RmsProp optimizer(model.weights());
  double lr = config.learning_rate;
  const std::vector<bool> mask = model.trainable_mask();
  std::vector<std::size_t> order(n_records);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(config.seed);
  WeightBundle grads = model.weights().zeros_like();
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.use_lr_schedule) lr = lr_schedule(static_cast<int>(epoch), lr);
    optimizer.set_learning_rate(lr);
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n_records; start += config.batch_size) {
      const std::size_t end = std::min(n_records, start + config.batch_size);
      for (auto& e : grads.entries()) e.tensor.fill(0.0f);
      for (std::size_t j = start; j < end; ++j) epoch_loss += sample_step(order[j], grads);
      scale(grads, 1.0f / static_cast<float>(end - start));
      optimizer.step(model.weights(), grads, mask);
    }
    epoch_loss /= static_cast<double>(n_records);
    if (!std::isfinite(epoch_loss) || !model.weights().all_finite()) {
      fail(ErrorCode::kNumericFailure, "training diverged in epoch " + std::to_string(epoch));
    }
    stats.epoch_loss.push_back(epoch_loss);
  }
  return stats;
}

}  // namespace

TrainStats train_autoencoder(Model& autoencoder, const BeatDataset& noisy, const BeatDataset& clean,
                             const TrainConfig& config) {
  require(autoencoder.kind() == ModelKind::kAutoencoder, ErrorCode::kInvalidArgument,
          "train_autoencoder needs an autoencoder");
  require(noisy.size() == clean.size(), ErrorCode::kShapeMismatch, "noisy and clean sets differ in size");
  Model::Trace trace;
  return run_epochs(autoencoder, noisy.size(), config, [&](std::size_t i, WeightBundle& grads) {
    const Tensor target = pad_beat(clean.records[i]);
    const Tensor out = autoencoder.forward(pad_beat(noisy.records[i]), trace);
    autoencoder.backward(trace, nn::mse_grad(out, target), &grads, 0, false);
    return static_cast<double>(nn::reconstruction_loss(out, target, nn::ReconstructionMode::kMse));
  });
}

TrainStats train_classifier(Model& classifier, const BeatDataset& data, const TrainConfig& config) {
  require(classifier.kind() == ModelKind::kClassifier, ErrorCode::kInvalidArgument,
          "train_classifier needs a classifier");
  // Layers below the first trainable one never change during this session,
  // so their output is computed once per record.
  const std::size_t start_layer = classifier.first_trainable_layer();
  require(start_layer < classifier.spec().layers.size(), ErrorCode::kInvalidArgument,
          "classifier has no trainable layers");
  std::vector<Tensor> features;
  features.reserve(data.size());
  for (const auto& record : data.records) {
    Model::Trace prefix;
    Tensor x = pad_beat(record);
    if (start_layer > 0) {
      classifier.forward(x, prefix);
      x = prefix.inputs[start_layer];
    }
    features.push_back(std::move(x));
  }
  Model::Trace trace;
  return run_epochs(classifier, data.size(), config, [&](std::size_t i, WeightBundle& grads) {
    const Tensor logits = classifier.forward(features[i], trace, start_layer);
    const Tensor probs = nn::softmax(logits);
    const std::size_t label = data.records[i].label;
    classifier.backward(trace, nn::softmax_cross_entropy_grad(probs, label), &grads, start_layer, false);
    return static_cast<double>(nn::cross_entropy(probs, label));
  });
}

double reconstruction_mae(const Model& autoencoder, const BeatDataset& noisy, const BeatDataset& clean) {
  require(noisy.size() == clean.size() && !noisy.empty(), ErrorCode::kShapeMismatch,
          "reconstruction MAE needs equally sized, non-empty sets");
  double total = 0.0;
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    const auto out = crop_beat(autoencoder.forward(pad_beat(noisy.records[i])));
    for (std::size_t t = 0; t < kBeatLength; ++t) total += std::abs(static_cast<double>(out[t]) - clean.records[i].samples[t]);
  }
  return total / static_cast<double>(noisy.size() * kBeatLength);
}

double reconstruction_mse(const Model& autoencoder, const BeatDataset& noisy, const BeatDataset& clean) {
  require(noisy.size() == clean.size() && !noisy.empty(), ErrorCode::kShapeMismatch,
          "reconstruction MSE needs equally sized, non-empty sets");
  double total = 0.0;
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    const auto out = crop_beat(autoencoder.forward(pad_beat(noisy.records[i])));
    for (std::size_t t = 0; t < kBeatLength; ++t) {
      const double d = static_cast<double>(out[t]) - clean.records[i].samples[t];
      total += d * d;
    }
  }
  return total / static_cast<double>(noisy.size() * kBeatLength);
}

std::vector<std::size_t> predict_labels(const Model& classifier, const BeatDataset& data) {
  std::vector<std::size_t> out;
  out.reserve(data.size());
  for (const auto& r : data.records) out.push_back(predict(classifier, pad_beat(r)).predicted_class);
  return out;
}

std::vector<std::size_t> true_labels(const BeatDataset& data) {
  std::vector<std::size_t> out;
  out.reserve(data.size());
  for (const auto& r : data.records) out.push_back(r.label);
  return out;
}

double mean_cross_entropy(const Model& classifier, const BeatDataset& data) {
  require(!data.empty(), ErrorCode::kInvalidArgument, "empty dataset");
  double total = 0.0;
  for (const auto& r : data.records) {
    total += nn::cross_entropy(nn::softmax(classifier.forward(pad_beat(r))), r.label);
  }
  return total / static_cast<double>(data.size());
}

}  // namespace fedecg
