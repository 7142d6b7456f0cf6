#pragma once

// Forward and backward passes for the 1D layer set. Every function is a
// template over the scalar type: float for training and inference, double for
// finite-difference gradient checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fedecg/error.hpp"
#include "fedecg/tensor.hpp"

namespace fedecg::nn {

inline constexpr std::size_t kKernelSize = 3;
inline constexpr std::size_t kPoolFactor = 2;

inline std::size_t conv_parameter_count(std::size_t in_channels, std::size_t out_channels) {
  return out_channels * in_channels * kKernelSize + out_channels;
}

inline std::size_t dense_parameter_count(std::size_t in_features, std::size_t out_features) {
  return out_features * in_features + out_features;
}

namespace detail {

inline void check_conv_shapes(const Shape& input, const Shape& kernel, const Shape& bias) {
  require(input.size() == 2, ErrorCode::kShapeMismatch,
          "conv1d input must be channels x length, got " + shape_to_string(input));
  require(kernel.size() == 3 && kernel[2] == kKernelSize, ErrorCode::kShapeMismatch,
          "conv1d kernel must be out x in x 3, got " + shape_to_string(kernel));
  require(kernel[1] == input[0], ErrorCode::kShapeMismatch,
          "conv1d kernel expects " + std::to_string(kernel[1]) + " input channels, input has " +
              std::to_string(input[0]));
  require(bias.size() == 1 && bias[0] == kernel[0], ErrorCode::kShapeMismatch,
          "conv1d bias must have one value per output channel");
}

// out[t] += w * in[t + k - 1] with zero padding outside [0, length).
template <typename T>
inline void shifted_axpy(T w, const T* in, T* out, std::size_t length, std::size_t k) {
  if (k == 0) {
    for (std::size_t t = 1; t < length; ++t) out[t] += w * in[t - 1];
  } else if (k == 1) {
    for (std::size_t t = 0; t < length; ++t) out[t] += w * in[t];
  } else {
    for (std::size_t t = 0; t + 1 < length; ++t) out[t] += w * in[t + 1];
  }
}

// Sum over t of g[t] * in[t + k - 1].
template <typename T>
inline T shifted_dot(const T* g, const T* in, std::size_t length, std::size_t k) {
  T acc{0};
  if (k == 0) {
    for (std::size_t t = 1; t < length; ++t) acc += g[t] * in[t - 1];
  } else if (k == 1) {
    for (std::size_t t = 0; t < length; ++t) acc += g[t] * in[t];
  } else {
    for (std::size_t t = 0; t + 1 < length; ++t) acc += g[t] * in[t + 1];
  }
  return acc;
}

// grad_in[s] += w * g[s - k + 1]; the transpose of shifted_axpy.
template <typename T>
inline void shifted_axpy_transpose(T w, const T* g, T* grad_in, std::size_t length, std::size_t k) {
  if (k == 0) {
    for (std::size_t s = 0; s + 1 < length; ++s) grad_in[s] += w * g[s + 1];
  } else if (k == 1) {
    for (std::size_t s = 0; s < length; ++s) grad_in[s] += w * g[s];
  } else {
    for (std::size_t s = 1; s < length; ++s) grad_in[s] += w * g[s - 1];
  }
}

}  // namespace detail

/// Same-padded stride-1 convolution: out[c,t] = bias[c] + sum_{i,k} w[c,i,k] * in[i, t+k-1].
template <typename T>
BasicTensor<T> conv1d(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                      const BasicTensor<T>& bias) {
  detail::check_conv_shapes(input.shape(), kernel.shape(), bias.shape());
  const std::size_t in_ch = input.dim(0);
  const std::size_t length = input.dim(1);
  const std::size_t out_ch = kernel.dim(0);
  BasicTensor<T> out({out_ch, length});
  for (std::size_t c = 0; c < out_ch; ++c) {
    T* out_row = out.data() + c * length;
    std::fill(out_row, out_row + length, bias[c]);
    for (std::size_t i = 0; i < in_ch; ++i) {
      const T* in_row = input.data() + i * length;
      const T* w = kernel.data() + (c * in_ch + i) * kKernelSize;
      for (std::size_t k = 0; k < kKernelSize; ++k) {
        detail::shifted_axpy(w[k], in_row, out_row, length, k);
      }
    }
  }
  return out;
}

template <typename T>
struct ConvGradients {
  BasicTensor<T> input;
  BasicTensor<T> kernel;
  BasicTensor<T> bias;
};

/// Accumulating backward pass. `grad_input` may be null when the caller does not
/// need it (the first layer, or below a frozen prefix).
template <typename T>
void conv1d_backward_accumulate(const BasicTensor<T>& grad_out, const BasicTensor<T>& input,
                                const BasicTensor<T>& kernel, BasicTensor<T>* grad_input,
                                BasicTensor<T>* grad_kernel, BasicTensor<T>* grad_bias) {
  require(!input.empty(), ErrorCode::kMissingCache, "conv1d backward called without a forward cache");
  require(grad_out.rank() == 2 && grad_out.dim(0) == kernel.dim(0) && grad_out.dim(1) == input.dim(1),
          ErrorCode::kShapeMismatch,
          "conv1d grad_out shape " + shape_to_string(grad_out.shape()) + " does not match forward output");
  const std::size_t in_ch = input.dim(0);
  const std::size_t length = input.dim(1);
  const std::size_t out_ch = kernel.dim(0);
  for (std::size_t c = 0; c < out_ch; ++c) {
    const T* g = grad_out.data() + c * length;
    if (grad_bias != nullptr) {
      T acc{0};
      for (std::size_t t = 0; t < length; ++t) acc += g[t];
      (*grad_bias)[c] += acc;
    }
    for (std::size_t i = 0; i < in_ch; ++i) {
      const T* in_row = input.data() + i * length;
      const T* w = kernel.data() + (c * in_ch + i) * kKernelSize;
      for (std::size_t k = 0; k < kKernelSize; ++k) {
        if (grad_kernel != nullptr) {
          (*grad_kernel)[(c * in_ch + i) * kKernelSize + k] += detail::shifted_dot(g, in_row, length, k);
        }
        if (grad_input != nullptr) {
          detail::shifted_axpy_transpose(w[k], g, grad_input->data() + i * length, length, k);
        }
      }
    }
  }
}

template <typename T>
ConvGradients<T> conv1d_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& input,
                                 const BasicTensor<T>& kernel) {
  require(!input.empty(), ErrorCode::kMissingCache, "conv1d backward called without a forward cache");
  ConvGradients<T> grads{BasicTensor<T>(input.shape()), BasicTensor<T>(kernel.shape()),
                         BasicTensor<T>({kernel.dim(0)})};
  conv1d_backward_accumulate(grad_out, input, kernel, &grads.input, &grads.kernel, &grads.bias);
  return grads;
}

template <typename T>
struct PoolResult {
  BasicTensor<T> output;
  std::vector<std::uint32_t> argmax;  // flat input index per output element
};

/// Non-overlapping max pooling; the leftmost element wins ties.
template <typename T>
PoolResult<T> maxpool1d(const BasicTensor<T>& input, std::size_t factor = kPoolFactor) {
  require(input.rank() == 2, ErrorCode::kShapeMismatch, "maxpool1d input must be channels x length");
  require(factor >= 1, ErrorCode::kInvalidArgument, "pool factor must be positive");
  const std::size_t channels = input.dim(0);
  const std::size_t length = input.dim(1);
  require(length % factor == 0, ErrorCode::kShapeMismatch,
          "maxpool1d length " + std::to_string(length) + " is not divisible by " + std::to_string(factor));
  const std::size_t out_len = length / factor;
  PoolResult<T> result{BasicTensor<T>({channels, out_len}), std::vector<std::uint32_t>(channels * out_len)};
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t t = 0; t < out_len; ++t) {
      const std::size_t start = c * length + t * factor;
      std::size_t best = start;
      for (std::size_t j = 1; j < factor; ++j) {
        if (input[start + j] > input[best]) best = start + j;
      }
      result.output[c * out_len + t] = input[best];
      result.argmax[c * out_len + t] = static_cast<std::uint32_t>(best);
    }
  }
  return result;
}

/// Routes each output gradient to the input element that won the max.
template <typename T>
BasicTensor<T> maxpool1d_backward(const BasicTensor<T>& grad_out, std::span<const std::uint32_t> argmax,
                                  const Shape& input_shape) {
  require(!argmax.empty(), ErrorCode::kMissingCache, "maxpool1d backward called without argmax indices");
  require(argmax.size() == grad_out.size(), ErrorCode::kShapeMismatch,
          "maxpool1d grad_out does not match the recorded argmax");
  BasicTensor<T> grad_in(input_shape);
  for (std::size_t j = 0; j < argmax.size(); ++j) grad_in[argmax[j]] += grad_out[j];
  return grad_in;
}

/// Nearest-neighbour repetition: out[c, f*t + j] = in[c, t].
template <typename T>
BasicTensor<T> upsample1d(const BasicTensor<T>& input, std::size_t factor = kPoolFactor) {
  require(input.rank() == 2, ErrorCode::kShapeMismatch, "upsample1d input must be channels x length");
  require(factor >= 1, ErrorCode::kInvalidArgument, "upsample factor must be positive");
  const std::size_t channels = input.dim(0);
  const std::size_t length = input.dim(1);
  BasicTensor<T> out({channels, length * factor});
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t t = 0; t < length; ++t) {
      for (std::size_t j = 0; j < factor; ++j) out[(c * length + t) * factor + j] = input[c * length + t];
    }
  }
  return out;
}

/// Transpose of repetition: sums each group of `factor` adjacent gradients.
template <typename T>
BasicTensor<T> upsample1d_backward(const BasicTensor<T>& grad_out, std::size_t factor = kPoolFactor) {
  require(grad_out.rank() == 2 && grad_out.dim(1) % factor == 0, ErrorCode::kShapeMismatch,
          "upsample1d grad_out length must be a multiple of the factor");
  const std::size_t channels = grad_out.dim(0);
  const std::size_t length = grad_out.dim(1) / factor;
  BasicTensor<T> grad_in({channels, length});
  for (std::size_t j = 0; j < grad_in.size(); ++j) {
    T acc{0};
    for (std::size_t r = 0; r < factor; ++r) acc += grad_out[j * factor + r];
    grad_in[j] = acc;
  }
  return grad_in;
}

/// out = W x + b, where x is the flattened input of any rank.
template <typename T>
BasicTensor<T> dense(const BasicTensor<T>& input, const BasicTensor<T>& weights, const BasicTensor<T>& bias) {
  require(weights.rank() == 2, ErrorCode::kShapeMismatch, "dense weights must be out x in");
  const std::size_t m = weights.dim(0);
  const std::size_t n = weights.dim(1);
  require(input.size() == n, ErrorCode::kShapeMismatch,
          "dense expects " + std::to_string(n) + " inputs, got " + std::to_string(input.size()));
  require(bias.rank() == 1 && bias.dim(0) == m, ErrorCode::kShapeMismatch, "dense bias must have one value per output");
  BasicTensor<T> out({m});
  const T* x = input.data();
  for (std::size_t r = 0; r < m; ++r) {
    const T* w = weights.data() + r * n;
    T acc{0};
    for (std::size_t j = 0; j < n; ++j) acc += w[j] * x[j];
    out[r] = acc + bias[r];
  }
  return out;
}

template <typename T>
void dense_backward_accumulate(const BasicTensor<T>& grad_out, const BasicTensor<T>& input,
                               const BasicTensor<T>& weights, BasicTensor<T>* grad_input,
                               BasicTensor<T>* grad_weights, BasicTensor<T>* grad_bias) {
  require(!input.empty(), ErrorCode::kMissingCache, "dense backward called without a forward cache");
  const std::size_t m = weights.dim(0);
  const std::size_t n = weights.dim(1);
  require(grad_out.size() == m && input.size() == n, ErrorCode::kShapeMismatch,
          "dense backward shapes do not match the forward pass");
  const T* x = input.data();
  for (std::size_t r = 0; r < m; ++r) {
    const T g = grad_out[r];
    if (grad_bias != nullptr) (*grad_bias)[r] += g;
    if (g == T{0}) continue;
    const T* w = weights.data() + r * n;
    if (grad_weights != nullptr) {
      T* gw = grad_weights->data() + r * n;
      for (std::size_t j = 0; j < n; ++j) gw[j] += g * x[j];
    }
    if (grad_input != nullptr) {
      T* gi = grad_input->data();
      for (std::size_t j = 0; j < n; ++j) gi[j] += g * w[j];
    }
  }
}

template <typename T>
struct DenseGradients {
  BasicTensor<T> input;
  BasicTensor<T> weights;
  BasicTensor<T> bias;
};

template <typename T>
DenseGradients<T> dense_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& input,
                                 const BasicTensor<T>& weights) {
  require(!input.empty(), ErrorCode::kMissingCache, "dense backward called without a forward cache");
  DenseGradients<T> grads{BasicTensor<T>(input.shape()), BasicTensor<T>(weights.shape()),
                          BasicTensor<T>({weights.dim(0)})};
  dense_backward_accumulate(grad_out, input, weights, &grads.input, &grads.weights, &grads.bias);
  return grads;
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input) {
  BasicTensor<T> out = input;
  for (T& v : out.values()) v = v > T{0} ? v : T{0};
  return out;
}

/// Gradient passes only where the forward input was strictly positive.
template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& input) {
  require(!input.empty(), ErrorCode::kMissingCache, "relu backward called without a forward cache");
  require(grad_out.size() == input.size(), ErrorCode::kShapeMismatch, "relu grad_out does not match input");
  BasicTensor<T> grad_in(input.shape());
  for (std::size_t j = 0; j < input.size(); ++j) grad_in[j] = input[j] > T{0} ? grad_out[j] : T{0};
  return grad_in;
}

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits) {
  require(logits.size() >= 2, ErrorCode::kShapeMismatch, "softmax needs at least two classes");
  const T peak = *std::max_element(logits.values().begin(), logits.values().end());
  BasicTensor<T> out({logits.size()});
  T total{0};
  for (std::size_t j = 0; j < logits.size(); ++j) {
    out[j] = std::exp(logits[j] - peak);
    total += out[j];
  }
  for (T& v : out.values()) v /= total;
  return out;
}

}  // namespace fedecg::nn
