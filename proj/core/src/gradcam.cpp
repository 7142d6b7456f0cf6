#include "fedecg/gradcam.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "fedecg/error.hpp"

namespace fedecg {

std::size_t last_conv_activation_layer(const ModelSpec& spec) {
  std::size_t last_conv = spec.layers.size();
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (spec.layers[i].kind == LayerKind::kConv1D) last_conv = i;
  }
  require(last_conv < spec.layers.size(), ErrorCode::kShapeMismatch, "model has no convolution layer");
  std::size_t tap = last_conv + 1;
  if (tap < spec.layers.size() && spec.layers[tap].kind == LayerKind::kReLU) ++tap;
  require(tap < spec.layers.size(), ErrorCode::kShapeMismatch, "last convolution has no layer after it");
  return tap;
}

GradCamTap grad_cam(const Model& classifier, const Tensor& beat, std::size_t target_class) {
  require(classifier.kind() == ModelKind::kClassifier, ErrorCode::kShapeMismatch, "grad_cam needs a classifier");
  require(target_class < kNumClasses, ErrorCode::kInvalidArgument,
          "target class " + std::to_string(target_class) + " out of range");
  const std::size_t tap_layer = last_conv_activation_layer(classifier.spec());
  Model::Trace trace;
  const Tensor logits = classifier.forward(beat, trace);
  Tensor seed(logits.shape());
  seed[target_class] = 1.0f;

  GradCamTap tap;
  tap.target_class = target_class;
  tap.activations = trace.inputs[tap_layer];
  tap.gradients = classifier.backward(trace, seed, nullptr, tap_layer, true);
  tap.normalization = tap.activations.dim(1);
  tap.alphas = gradcam_alphas(tap.gradients);
  return tap;
}

std::vector<float> gradcam_alphas(const Tensor& gradients) {
  require(gradients.rank() == 2 && gradients.dim(1) > 0, ErrorCode::kShapeMismatch,
          "gradients must be maps x time, got " + shape_to_string(gradients.shape()));
  const std::size_t maps = gradients.dim(0);
  const std::size_t steps = gradients.dim(1);
  std::vector<float> alphas(maps);
  for (std::size_t k = 0; k < maps; ++k) {
    double sum = 0.0;
    for (float g : gradients.row(k)) sum += g;
    alphas[k] = static_cast<float>(sum / static_cast<double>(steps));
  }
  return alphas;
}

std::vector<float> combine_heatmap(const GradCamTap& tap) {
  require(tap.activations.rank() == 2 && tap.alphas.size() == tap.activations.dim(0), ErrorCode::kShapeMismatch,
          "alpha count does not match the number of feature maps");
  const std::size_t steps = tap.activations.dim(1);
  std::vector<float> heat(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    double acc = 0.0;
    for (std::size_t k = 0; k < tap.alphas.size(); ++k) {
      acc += static_cast<double>(tap.alphas[k]) * tap.activations.at(k, t);
    }
    heat[t] = static_cast<float>(std::max(0.0, acc));
  }
  return heat;
}

std::vector<float> upsample_heatmap(std::span<const float> raw, std::size_t target_len) {
  require(!raw.empty(), ErrorCode::kInvalidArgument, "empty heatmap");
  require(target_len >= raw.size(), ErrorCode::kInvalidArgument,
          "cannot upsample " + std::to_string(raw.size()) + " points to " + std::to_string(target_len));
  const std::size_t n = raw.size();
  const std::size_t factor = (target_len + n - 1) / n;
  std::vector<float> out(target_len);
  for (std::size_t i = 0; i < target_len; ++i) {
    double pos = (static_cast<double>(i) + 0.5) / static_cast<double>(factor) - 0.5;
    pos = std::clamp(pos, 0.0, static_cast<double>(n - 1));
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, n - 1);
    const double frac = pos - static_cast<double>(lo);
    out[i] = static_cast<float>((1.0 - frac) * raw[lo] + frac * raw[hi]);
  }
  return out;
}

Heatmap explain(const Model& classifier, const Model& autoencoder, const BeatRecord& beat,
                std::optional<std::size_t> target_class) {
  require(classifier.kind() == ModelKind::kClassifier && autoencoder.kind() == ModelKind::kAutoencoder,
          ErrorCode::kShapeMismatch, "explain needs a classifier and an autoencoder");
  require(classifier.spec().input_length == autoencoder.spec().input_length, ErrorCode::kShapeMismatch,
          "classifier and autoencoder disagree on input length");
  const Tensor input = pad_beat(beat);
  Heatmap h;
  h.class_index = target_class ? *target_class : predict(classifier, input).predicted_class;
  const GradCamTap tap = grad_cam(classifier, input, h.class_index);
  h.raw = combine_heatmap(tap);
  h.upsampled = upsample_heatmap(h.raw, kBeatLength);
  h.overlay_signal = crop_beat(autoencoder.forward(input));
  return h;
}

std::string heatmap_csv(const Heatmap& h) {
  std::string out = "t,signal,importance\n";
  char line[96];
  for (std::size_t t = 0; t < kBeatLength; ++t) {
    std::snprintf(line, sizeof(line), "%zu,%.9g,%.9g\n", t, static_cast<double>(h.overlay_signal[t]),
                  static_cast<double>(h.upsampled.at(t)));
    out += line;
  }
  return out;
}

std::string heatmap_svg(const Heatmap& h) {
  constexpr double kWidth = 800.0;
  constexpr double kHeight = 300.0;
  constexpr double kMargin = 10.0;
  const auto [lo_it, hi_it] = std::minmax_element(h.upsampled.begin(), h.upsampled.end());
  const double lo = *lo_it;
  const double range = static_cast<double>(*hi_it) - lo;
  auto x_of = [&](std::size_t t) {
    return kMargin + (kWidth - 2 * kMargin) * static_cast<double>(t) / static_cast<double>(kBeatLength - 1);
  };
  auto y_of = [&](float v) { return kHeight - kMargin - (kHeight - 2 * kMargin) * static_cast<double>(v); };

  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 300\" width=\"800\" height=\"300\">\n"
                "<title>class %c</title>\n<rect width=\"800\" height=\"300\" fill=\"white\"/>\n"
                "<g stroke-width=\"2\" fill=\"none\" stroke-linecap=\"round\">\n",
                class_label(h.class_index));
  out += line;
  for (std::size_t t = 0; t + 1 < kBeatLength; ++t) {
    // Zero range maps every segment to the cold end of the scale.
    const double level = range > 0.0 ? (static_cast<double>(h.upsampled[t]) - lo) / range : 0.0;
    const int red = static_cast<int>(std::lround(255.0 * level));
    const int blue = 255 - red;
    std::snprintf(line, sizeof(line),
                  "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"rgb(%d,0,%d)\"/>\n", x_of(t),
                  y_of(h.overlay_signal[t]), x_of(t + 1), y_of(h.overlay_signal[t + 1]), red, blue);
    out += line;
  }
  out += "</g>\n</svg>\n";
  return out;
}

void export_heatmap(const Heatmap& h, const std::filesystem::path& path, HeatmapFormat format) {
  const std::string text = format == HeatmapFormat::kCsv ? heatmap_csv(h) : heatmap_svg(h);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out << text;
  require(out.good(), ErrorCode::kIo, "failed writing " + path.string());
}

}  // namespace fedecg
