#include "fedecg/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "fedecg/error.hpp"
#include "fedecg/layers.hpp"
#include "fedecg/random.hpp"

namespace fedecg {

namespace {

LayerSpec conv(std::string name, std::size_t in, std::size_t out) {
  return {LayerKind::kConv1D, std::move(name), in, out};
}
LayerSpec relu(std::string name) { return {LayerKind::kReLU, std::move(name)}; }
LayerSpec pool(std::string name) { return {LayerKind::kMaxPool1D, std::move(name)}; }
LayerSpec upsample(std::string name) { return {LayerKind::kUpsample1D, std::move(name)}; }
LayerSpec dense(std::string name, std::size_t in, std::size_t out) {
  return {LayerKind::kDense, std::move(name), in, out};
}

std::string kernel_name(const std::string& layer) { return layer + ".kernel"; }
std::string bias_name(const std::string& layer) { return layer + ".bias"; }

Shape kernel_shape(const LayerSpec& layer) {
  if (layer.kind == LayerKind::kConv1D) return {layer.out_channels, layer.in_channels, layer.kernel_size};
  return {layer.out_channels, layer.in_channels};
}

}  // namespace

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv1D: return "Conv1D";
    case LayerKind::kMaxPool1D: return "MaxPool1D";
    case LayerKind::kUpsample1D: return "Upsample1D";
    case LayerKind::kDense: return "Dense";
    case LayerKind::kReLU: return "ReLU";
    case LayerKind::kSoftmaxDense: return "SoftmaxDense";
  }
  return "?";
}

std::size_t LayerSpec::parameter_count() const {
  switch (kind) {
    case LayerKind::kConv1D: return nn::conv_parameter_count(in_channels, out_channels);
    case LayerKind::kDense:
    case LayerKind::kSoftmaxDense: return nn::dense_parameter_count(in_channels, out_channels);
    default: return 0;
  }
}

const LayerSpec* ModelSpec::find(std::string_view name) const {
  auto it = std::find_if(layers.begin(), layers.end(), [&](const LayerSpec& l) { return l.name == name; });
  return it == layers.end() ? nullptr : &*it;
}

std::size_t ModelSpec::index_of(std::string_view name) const {
  const LayerSpec* layer = find(name);
  if (layer == nullptr) fail(ErrorCode::kUnknownLayer, "model has no layer '" + std::string(name) + "'");
  return static_cast<std::size_t>(layer - layers.data());
}

void ModelSpec::validate() const {
  std::set<std::string> names;
  std::size_t channels = 1;
  std::size_t length = input_length;
  bool flat = false;
  for (const auto& layer : layers) {
    require(names.insert(layer.name).second, ErrorCode::kInvalidArgument, "duplicate layer name '" + layer.name + "'");
    switch (layer.kind) {
      case LayerKind::kConv1D:
        require(layer.kernel_size == nn::kKernelSize, ErrorCode::kInvalidArgument,
                "conv layer '" + layer.name + "' must use kernel size 3");
        require(!flat && layer.in_channels == channels, ErrorCode::kShapeMismatch,
                "conv layer '" + layer.name + "' input channels do not chain");
        channels = layer.out_channels;
        break;
      case LayerKind::kMaxPool1D:
        require(!flat && length % layer.pool_factor == 0, ErrorCode::kShapeMismatch,
                "pool layer '" + layer.name + "' gets an indivisible length");
        length /= layer.pool_factor;
        break;
      case LayerKind::kUpsample1D:
        require(!flat, ErrorCode::kShapeMismatch, "cannot upsample a flat activation");
        length *= layer.pool_factor;
        break;
      case LayerKind::kDense:
      case LayerKind::kSoftmaxDense:
        require(layer.in_channels == channels * length, ErrorCode::kShapeMismatch,
                "dense layer '" + layer.name + "' expects " + std::to_string(layer.in_channels) + " inputs, gets " +
                    std::to_string(channels * length));
        channels = layer.out_channels;
        length = 1;
        flat = true;
        break;
      case LayerKind::kReLU:
        break;
    }
  }
}

ModelSpec autoencoder_spec() {
  ModelSpec spec;
  spec.kind = ModelKind::kAutoencoder;
  spec.layers = {
      conv("enc_conv1", 1, 16),  relu("enc_relu1"), pool("enc_pool1"),
      conv("enc_conv2", 16, 32), relu("enc_relu2"), pool("enc_pool2"),
      conv("enc_conv3", 32, 64), relu("enc_relu3"), pool("enc_pool3"),
      conv("dec_conv1", 64, 32), relu("dec_relu1"), upsample("dec_up1"),
      conv("dec_conv2", 32, 16), relu("dec_relu2"), upsample("dec_up2"),
      conv("dec_conv3", 16, 16), relu("dec_relu3"), upsample("dec_up3"),
      conv("out_conv", 16, 1),
  };
  return spec;
}

ModelSpec classifier_spec() {
  ModelSpec spec;
  spec.kind = ModelKind::kClassifier;
  spec.layers = {
      conv("conv1", 1, 16),  relu("relu1"), pool("pool1"),
      conv("conv2", 16, 32), relu("relu2"), pool("pool2"),
      conv("conv3", 32, 64), relu("relu3"), pool("pool3"),
      conv("conv4", 64, 64), relu("relu4"),
      dense("dense1", 24 * 64, 128), relu("relu5"),
      dense("dense2", 128, 32), relu("relu6"),
      LayerSpec{LayerKind::kSoftmaxDense, "output", 32, kNumClasses},
  };
  return spec;
}

const std::vector<std::string>& encoder_layers() {
  static const std::vector<std::string> names = {"enc_conv1", "enc_conv2", "enc_conv3"};
  return names;
}

const std::vector<std::string>& decoder_layers() {
  static const std::vector<std::string> names = {"dec_conv1", "dec_conv2", "dec_conv3", "out_conv"};
  return names;
}

const std::vector<std::string>& classifier_frozen_layers() {
  static const std::vector<std::string> names = {"conv1", "conv2", "conv3"};
  return names;
}

const std::vector<std::string>& classifier_trainable_conv_layers() {
  static const std::vector<std::string> names = {"conv4"};
  return names;
}

const std::vector<std::string>& classifier_dense_layers() {
  static const std::vector<std::string> names = {"dense1", "dense2", "output"};
  return names;
}

WeightBundle init_weights(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  WeightBundle bundle(spec.kind);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& layer = spec.layers[i];
    if (!layer.has_parameters()) continue;
    const std::size_t receptive = layer.kind == LayerKind::kConv1D ? layer.kernel_size : 1;
    const double fan_in = static_cast<double>(layer.in_channels * receptive);
    const double fan_out = static_cast<double>(layer.out_channels * receptive);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Rng rng(derive_seed(seed, i));
    Tensor kernel(kernel_shape(layer));
    for (float& w : kernel.values()) w = static_cast<float>(rng.uniform(-limit, limit));
    bundle.add(kernel_name(layer.name), std::move(kernel));
    bundle.add(bias_name(layer.name), Tensor({layer.out_channels}));
  }
  return bundle;
}

Model::Model(ModelSpec spec, WeightBundle weights) : spec_(std::move(spec)), weights_(std::move(weights)) {
  spec_.validate();
  require(weights_.kind() == spec_.kind, ErrorCode::kShapeMismatch,
          "bundle is a " + std::string(to_string(weights_.kind())) + ", model is a " +
              std::string(to_string(spec_.kind)));
  bind_entries();
}

void Model::bind_entries() {
  kernel_entry_.assign(spec_.layers.size(), -1);
  bias_entry_.assign(spec_.layers.size(), -1);
  std::size_t expected_entries = 0;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const auto& layer = spec_.layers[i];
    if (!layer.has_parameters()) continue;
    expected_entries += 2;
    for (std::size_t e = 0; e < weights_.size(); ++e) {
      const auto& entry = weights_.entries()[e];
      if (entry.name == kernel_name(layer.name)) kernel_entry_[i] = static_cast<int>(e);
      if (entry.name == bias_name(layer.name)) bias_entry_[i] = static_cast<int>(e);
    }
    require(kernel_entry_[i] >= 0 && bias_entry_[i] >= 0, ErrorCode::kUnknownLayer,
            "bundle is missing parameters for layer '" + layer.name + "'");
    require(weights_.entries()[kernel_entry_[i]].tensor.shape() == kernel_shape(layer) &&
                weights_.entries()[bias_entry_[i]].tensor.shape() == Shape{layer.out_channels},
            ErrorCode::kShapeMismatch, "parameter shapes for layer '" + layer.name + "' do not match the spec");
  }
  require(weights_.size() == expected_entries, ErrorCode::kShapeMismatch,
          "bundle has entries that do not belong to the model");
}

void Model::set_weights(WeightBundle weights) {
  require(weights.kind() == spec_.kind, ErrorCode::kShapeMismatch, "bundle kind does not match the model");
  weights_ = std::move(weights);
  bind_entries();
}

bool Model::trainable(std::string_view layer) const { return spec_.layers[spec_.index_of(layer)].trainable; }

void Model::set_trainable(std::string_view layer, bool trainable) {
  spec_.layers[spec_.index_of(layer)].trainable = trainable;
}

std::vector<bool> Model::trainable_mask() const {
  std::vector<bool> mask(weights_.size(), false);
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    if (kernel_entry_[i] < 0) continue;
    mask[kernel_entry_[i]] = spec_.layers[i].trainable;
    mask[bias_entry_[i]] = spec_.layers[i].trainable;
  }
  return mask;
}

std::size_t Model::first_trainable_layer() const {
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    if (spec_.layers[i].has_parameters() && spec_.layers[i].trainable) return i;
  }
  return spec_.layers.size();
}

Tensor Model::forward(const Tensor& input) const {
  Trace trace;
  return forward(input, trace);
}

Tensor Model::forward(const Tensor& input, Trace& trace, std::size_t from_layer) const {
  const std::size_t n = spec_.layers.size();
  require(from_layer <= n, ErrorCode::kInvalidArgument, "forward start layer out of range");
  if (from_layer == 0) {
    require(input.rank() == 2 && input.dim(0) == 1 && input.dim(1) == spec_.input_length, ErrorCode::kShapeMismatch,
            "model input must be 1 x " + std::to_string(spec_.input_length) + ", got " +
                shape_to_string(input.shape()));
  }
  trace.inputs.resize(n);
  trace.argmax.resize(n);
  Tensor x = input;
  for (std::size_t i = from_layer; i < n; ++i) {
    const auto& layer = spec_.layers[i];
    trace.inputs[i] = x;
    switch (layer.kind) {
      case LayerKind::kConv1D:
        x = nn::conv1d(x, weights_.entries()[kernel_entry_[i]].tensor, weights_.entries()[bias_entry_[i]].tensor);
        break;
      case LayerKind::kReLU:
        x = nn::relu(x);
        break;
      case LayerKind::kMaxPool1D: {
        auto pooled = nn::maxpool1d(x, layer.pool_factor);
        x = std::move(pooled.output);
        trace.argmax[i] = std::move(pooled.argmax);
        break;
      }
      case LayerKind::kUpsample1D:
        x = nn::upsample1d(x, layer.pool_factor);
        break;
      case LayerKind::kDense:
      case LayerKind::kSoftmaxDense:
        x = nn::dense(x, weights_.entries()[kernel_entry_[i]].tensor, weights_.entries()[bias_entry_[i]].tensor);
        break;
    }
  }
  trace.output = x;
  return x;
}

Tensor Model::backward(const Trace& trace, const Tensor& grad_output, WeightBundle* grads, std::size_t down_to,
                       bool want_input_grad) const {
  const std::size_t n = spec_.layers.size();
  require(trace.inputs.size() == n, ErrorCode::kMissingCache, "backward called without a forward trace");
  require(down_to < n, ErrorCode::kInvalidArgument, "backward stop layer out of range");
  Tensor g = grad_output;
  for (std::size_t i = n; i-- > down_to;) {
    const auto& layer = spec_.layers[i];
    const Tensor& input = trace.inputs[i];
    const bool need_input = i > down_to || want_input_grad;
    switch (layer.kind) {
      case LayerKind::kConv1D:
      case LayerKind::kDense:
      case LayerKind::kSoftmaxDense: {
        const bool accumulate = grads != nullptr && layer.trainable;
        Tensor* gk = accumulate ? &grads->entries()[kernel_entry_[i]].tensor : nullptr;
        Tensor* gb = accumulate ? &grads->entries()[bias_entry_[i]].tensor : nullptr;
        Tensor gin = need_input ? Tensor(input.shape()) : Tensor();
        const Tensor& kernel = weights_.entries()[kernel_entry_[i]].tensor;
        if (layer.kind == LayerKind::kConv1D) {
          nn::conv1d_backward_accumulate(g, input, kernel, need_input ? &gin : nullptr, gk, gb);
        } else {
          nn::dense_backward_accumulate(g, input, kernel, need_input ? &gin : nullptr, gk, gb);
        }
        g = std::move(gin);
        break;
      }
      case LayerKind::kReLU:
        if (need_input) g = nn::relu_backward(g, input);
        break;
      case LayerKind::kMaxPool1D:
        if (need_input) g = nn::maxpool1d_backward(g, std::span<const std::uint32_t>(trace.argmax[i]), input.shape());
        break;
      case LayerKind::kUpsample1D:
        if (need_input) g = nn::upsample1d_backward(g, layer.pool_factor);
        break;
    }
  }
  return want_input_grad ? g : Tensor();
}

Model build_autoencoder(std::uint64_t seed) {
  ModelSpec spec = autoencoder_spec();
  WeightBundle weights = init_weights(spec, seed);
  return Model(std::move(spec), std::move(weights));
}

Model build_classifier(std::uint64_t seed) {
  ModelSpec spec = classifier_spec();
  WeightBundle weights = init_weights(spec, seed);
  return Model(std::move(spec), std::move(weights));
}

WeightBundle transfer_encoder(const WeightBundle& classifier, const WeightBundle& autoencoder) {
  require(classifier.kind() == ModelKind::kClassifier && autoencoder.kind() == ModelKind::kAutoencoder,
          ErrorCode::kInvalidArgument, "transfer_encoder needs a classifier and an autoencoder bundle");
  WeightBundle out = classifier;
  const auto& src_layers = encoder_layers();
  const auto& dst_layers = classifier_frozen_layers();
  for (std::size_t l = 0; l < src_layers.size(); ++l) {
    for (const char* suffix : {".kernel", ".bias"}) {
      const Tensor& src = autoencoder.at(src_layers[l] + suffix);
      Tensor& dst = out.at(dst_layers[l] + suffix);
      require(src.shape() == dst.shape(), ErrorCode::kShapeMismatch,
              "encoder layer " + src_layers[l] + " " + shape_to_string(src.shape()) + " does not fit classifier " +
                  dst_layers[l] + " " + shape_to_string(dst.shape()));
      dst = src;
    }
  }
  return out;
}

void transfer_encoder(Model& classifier, const WeightBundle& autoencoder) {
  classifier.set_weights(transfer_encoder(classifier.weights(), autoencoder));
  for (const auto& layer : classifier_frozen_layers()) classifier.set_trainable(layer, false);
}

std::size_t count_parameters(const WeightBundle& bundle, std::span<const std::string> layers) {
  std::size_t total = 0;
  for (const auto& layer : layers) {
    require(bundle.has_layer(layer), ErrorCode::kUnknownLayer, "bundle has no layer '" + layer + "'");
    for (const auto& entry : bundle.entries()) {
      if (layer_of(entry.name) == layer) total += entry.tensor.size();
    }
  }
  return total;
}

Prediction predict(const Model& classifier, const Tensor& input) {
  require(classifier.kind() == ModelKind::kClassifier, ErrorCode::kInvalidArgument, "predict needs a classifier");
  const Tensor probs = nn::softmax(classifier.forward(input));
  Prediction p;
  for (std::size_t c = 0; c < kNumClasses; ++c) p.class_probs[c] = probs[c];
  p.predicted_class = static_cast<std::size_t>(
      std::max_element(p.class_probs.begin(), p.class_probs.end()) - p.class_probs.begin());
  return p;
}

}  // namespace fedecg
