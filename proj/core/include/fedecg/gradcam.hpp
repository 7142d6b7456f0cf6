#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedecg/data.hpp"
#include "fedecg/model.hpp"
#include "fedecg/tensor.hpp"

namespace fedecg {

/// What Grad-CAM reads off the classifier's last convolution for one class.
struct GradCamTap {
  std::size_t target_class = 0;
  Tensor activations;         // feature maps A^k, maps x time (64 x 24)
  Tensor gradients;           // d y^c / d A^k, same shape
  std::vector<float> alphas;  // per-map importance: time-averaged gradient
  std::size_t normalization = 0;  // number of time steps averaged over
};

struct Heatmap {
  std::size_t class_index = 0;
  std::vector<float> raw;        // one value per last-conv time step
  std::vector<float> upsampled;  // aligned to the 187-sample beat
  std::array<float, kBeatLength> overlay_signal{};  // autoencoder-denoised beat
};

enum class HeatmapFormat { kCsv, kSvg };

/// Index of the layer whose input is the last conv block's activation.
std::size_t last_conv_activation_layer(const ModelSpec& spec);

/// Gradients of the pre-softmax score of `target_class` with respect to the
/// last conv activations, and their time-averaged weights. Leaves the model untouched.
GradCamTap grad_cam(const Model& classifier, const Tensor& beat, std::size_t target_class);

/// alpha_k = (1/Z) sum_t grad[k][t] for a maps x time gradient.
std::vector<float> gradcam_alphas(const Tensor& gradients);

/// heat[t] = max(0, sum_k alpha_k A^k[t]).
std::vector<float> combine_heatmap(const GradCamTap& tap);

/// Linear interpolation with raw points at segment centres over the smallest
/// multiple of raw.size() covering target_len, cropped to target_len.
std::vector<float> upsample_heatmap(std::span<const float> raw, std::size_t target_len);

/// Full explanation of one beat; the target defaults to the predicted class.
Heatmap explain(const Model& classifier, const Model& autoencoder, const BeatRecord& beat,
                std::optional<std::size_t> target_class = std::nullopt);

std::string heatmap_csv(const Heatmap& heatmap);
std::string heatmap_svg(const Heatmap& heatmap);
void export_heatmap(const Heatmap& heatmap, const std::filesystem::path& path, HeatmapFormat format);

}  // namespace fedecg
