#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedecg/bundle.hpp"
#include "fedecg/classes.hpp"
#include "fedecg/tensor.hpp"

namespace fedecg {

inline constexpr std::size_t kInputLength = 192;

enum class LayerKind : std::uint8_t { kConv1D, kMaxPool1D, kUpsample1D, kDense, kReLU, kSoftmaxDense };

std::string_view to_string(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::kReLU;
  std::string name;
  std::size_t in_channels = 0;   // conv channels or dense input features
  std::size_t out_channels = 0;  // conv channels or dense output features
  std::size_t kernel_size = 3;
  std::size_t pool_factor = 2;
  bool trainable = true;

  bool has_parameters() const {
    return kind == LayerKind::kConv1D || kind == LayerKind::kDense || kind == LayerKind::kSoftmaxDense;
  }
  std::size_t parameter_count() const;
};

struct ModelSpec {
  ModelKind kind = ModelKind::kAutoencoder;
  std::size_t input_length = kInputLength;
  std::vector<LayerSpec> layers;

  const LayerSpec* find(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;
  /// Throws if names repeat, a conv kernel is not 3, or shapes do not chain.
  void validate() const;
};

ModelSpec autoencoder_spec();
ModelSpec classifier_spec();

/// Glorot-uniform kernels, zero biases, deterministic in `seed`.
WeightBundle init_weights(const ModelSpec& spec, std::uint64_t seed);

// Layer groups used by transfer and layer selection.
const std::vector<std::string>& encoder_layers();            // enc_conv1..3 (W1)
const std::vector<std::string>& decoder_layers();            // dec_conv1..3 + out_conv (W2)
const std::vector<std::string>& classifier_frozen_layers();  // conv1..3
const std::vector<std::string>& classifier_trainable_conv_layers();  // conv4 (WC1)
const std::vector<std::string>& classifier_dense_layers();   // dense1, dense2, output (WC2)

/// A model specification bound to its weights. The classifier's forward returns logits.
class Model {
 public:
  Model(ModelSpec spec, WeightBundle weights);

  const ModelSpec& spec() const noexcept { return spec_; }
  ModelKind kind() const noexcept { return spec_.kind; }
  const WeightBundle& weights() const noexcept { return weights_; }
  WeightBundle& weights() noexcept { return weights_; }

  /// Replaces all weights; shapes must match the spec.
  void set_weights(WeightBundle weights);

  bool trainable(std::string_view layer) const;
  void set_trainable(std::string_view layer, bool trainable);
  /// One flag per bundle entry.
  std::vector<bool> trainable_mask() const;
  /// Index of the first parametric layer that is trainable (layers.size() if none).
  std::size_t first_trainable_layer() const;

  struct Trace {
    std::vector<Tensor> inputs;                      // input of each layer
    std::vector<std::vector<std::uint32_t>> argmax;  // per max-pool layer
    Tensor output;
  };

  Tensor forward(const Tensor& input) const;
  /// Runs layers [from_layer, end). `input` is the input of `from_layer`.
  Tensor forward(const Tensor& input, Trace& trace, std::size_t from_layer = 0) const;

  /// Backpropagates `grad_output` through layers (down_to, end], plus layer `down_to`.
  /// Kernel/bias gradients of trainable layers accumulate into `grads` when non-null.
  /// Returns the gradient with respect to the input of layer `down_to` if requested.
  Tensor backward(const Trace& trace, const Tensor& grad_output, WeightBundle* grads, std::size_t down_to = 0,
                  bool want_input_grad = true) const;

 private:
  void bind_entries();

  ModelSpec spec_;
  WeightBundle weights_;
  std::vector<int> kernel_entry_;
  std::vector<int> bias_entry_;
};

Model build_autoencoder(std::uint64_t seed);
Model build_classifier(std::uint64_t seed);

/// Copies enc_conv1..3 into conv1..3 and returns the new classifier bundle.
WeightBundle transfer_encoder(const WeightBundle& classifier, const WeightBundle& autoencoder);
/// Same, applied to a model; also marks conv1..3 non-trainable.
void transfer_encoder(Model& classifier, const WeightBundle& autoencoder);

/// Parameter count over the named layers; unknown names are rejected.
std::size_t count_parameters(const WeightBundle& bundle, std::span<const std::string> layers);

struct Prediction {
  std::array<float, kNumClasses> class_probs{};
  std::size_t predicted_class = 0;
};

Prediction predict(const Model& classifier, const Tensor& input);

}  // namespace fedecg
