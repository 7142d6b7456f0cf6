#pragma once

#include <cstdint>
#include <vector>

#include "fedecg/data.hpp"
#include "fedecg/model.hpp"

namespace fedecg {

struct TrainConfig {
  std::size_t epochs = 1;
  std::size_t batch_size = 100;
  double learning_rate = 0.001;
  bool use_lr_schedule = false;  // autoencoder schedule instead of a fixed rate
  std::uint64_t seed = 0;
};

struct TrainStats {
  std::vector<double> epoch_loss;  // mean training loss per epoch
};

/// Denoising fit: noisy beats in, clean beats as targets, mean squared error.
TrainStats train_autoencoder(Model& autoencoder, const BeatDataset& noisy, const BeatDataset& clean,
                             const TrainConfig& config);

/// Softmax cross-entropy fit; frozen layers stay untouched.
TrainStats train_classifier(Model& classifier, const BeatDataset& data, const TrainConfig& config);

/// Mean absolute error over the 187 unpadded samples.
double reconstruction_mae(const Model& autoencoder, const BeatDataset& noisy, const BeatDataset& clean);
double reconstruction_mse(const Model& autoencoder, const BeatDataset& noisy, const BeatDataset& clean);

std::vector<std::size_t> predict_labels(const Model& classifier, const BeatDataset& data);
std::vector<std::size_t> true_labels(const BeatDataset& data);
double mean_cross_entropy(const Model& classifier, const BeatDataset& data);

}  // namespace fedecg
