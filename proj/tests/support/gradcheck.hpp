#pragma once

// Central finite differences in 64-bit against every layer's analytic backward pass.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>

#include "fedecg/layers.hpp"
#include "fedecg/loss.hpp"
#include "fedecg/random.hpp"

namespace fedecg::testing {

using namespace fedecg::nn;

inline constexpr double kFdStep = 1e-5;

inline double rel_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / scale;
}

// Keeps values away from ReLU kinks and pooling ties so the finite step never crosses them.
inline Tensor64 random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor64 t(shape);
  for (double& v : t.values()) {
    do {
      v = rng.uniform(lo, hi);
    } while (std::abs(v) < 1e-2);
  }
  return t;
}

inline double weighted_sum(const Tensor64& y, const Tensor64& r) {
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += y[i] * r[i];
  return acc;
}

// Max relative error between `analytic` and d f / d x, perturbing x in place.
template <typename F>
double compare_fd(Tensor64& x, const Tensor64& analytic, F&& f) {
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + kFdStep;
    const double up = f();
    x[i] = saved - kFdStep;
    const double down = f();
    x[i] = saved;
    worst = std::max(worst, rel_error(analytic[i], (up - down) / (2.0 * kFdStep)));
  }
  return worst;
}

// Per layer kind, the worst relative error over all inputs and parameters for one seed.
inline std::map<std::string, double> check_layer_gradients(std::uint64_t seed) {
  Rng rng(seed);
  std::map<std::string, double> worst;
  auto note = [&](const std::string& kind, double e) { worst[kind] = std::max(worst[kind], e); };

  {  // conv1d: loss = <r, conv(x)>
    const std::size_t cin = 1 + rng.below(3), cout = 1 + rng.below(4), len = 3 + rng.below(8);
    Tensor64 x = random_tensor({cin, len}, rng);
    Tensor64 k = random_tensor({cout, cin, nn::kKernelSize}, rng);
    Tensor64 b = random_tensor({cout}, rng);
    const Tensor64 r = random_tensor({cout, len}, rng);
    const auto g = nn::conv1d_backward(r, x, k);
    auto f = [&] { return weighted_sum(nn::conv1d(x, k, b), r); };
    note("conv1d", compare_fd(x, g.input, f));
    note("conv1d", compare_fd(k, g.kernel, f));
    note("conv1d", compare_fd(b, g.bias, f));
  }
  {  // maxpool1d
    const std::size_t ch = 1 + rng.below(3), len = 2 * (1 + rng.below(6));
    Tensor64 x = random_tensor({ch, len}, rng);
    const Tensor64 r = random_tensor({ch, len / 2}, rng);
    const auto pooled = nn::maxpool1d(x);
    const Tensor64 gx = nn::maxpool1d_backward(r, pooled.argmax, x.shape());
    note("maxpool1d", compare_fd(x, gx, [&] { return weighted_sum(nn::maxpool1d(x).output, r); }));
  }
  {  // upsample1d
    const std::size_t ch = 1 + rng.below(3), len = 1 + rng.below(6);
    Tensor64 x = random_tensor({ch, len}, rng);
    const Tensor64 r = random_tensor({ch, 2 * len}, rng);
    const Tensor64 gx = nn::upsample1d_backward(r);
    note("upsample1d", compare_fd(x, gx, [&] { return weighted_sum(nn::upsample1d(x), r); }));
  }
  {  // dense
    const std::size_t n = 1 + rng.below(12), m = 1 + rng.below(6);
    Tensor64 x = random_tensor({n}, rng);
    Tensor64 w = random_tensor({m, n}, rng);
    Tensor64 b = random_tensor({m}, rng);
    const Tensor64 r = random_tensor({m}, rng);
    const auto g = nn::dense_backward(r, x, w);
    auto f = [&] { return weighted_sum(nn::dense(x, w, b), r); };
    note("dense", compare_fd(x, g.input, f));
    note("dense", compare_fd(w, g.weights, f));
    note("dense", compare_fd(b, g.bias, f));
  }
  {  // relu
    Tensor64 x = random_tensor({2, 5}, rng);
    const Tensor64 r = random_tensor({2, 5}, rng);
    const Tensor64 gx = nn::relu_backward(r, x);
    note("relu", compare_fd(x, gx, [&] { return weighted_sum(nn::relu(x), r); }));
  }
  {  // softmax + cross-entropy head
    Tensor64 z = random_tensor({5}, rng, -3.0, 3.0);
    const std::size_t cls = rng.below(5);
    const Tensor64 gz = softmax_cross_entropy_grad(nn::softmax(z), cls);
    note("softmax_cross_entropy", compare_fd(z, gz, [&] { return cross_entropy(nn::softmax(z), cls); }));
  }
  {  // mean squared error
    Tensor64 p = random_tensor({1, 8}, rng);
    const Tensor64 t = random_tensor({1, 8}, rng);
    const Tensor64 gp = mse_grad(p, t);
    note("mse", compare_fd(p, gp, [&] { return reconstruction_loss(p, t, ReconstructionMode::kMse); }));
  }
  return worst;
}

}  // namespace fedecg::testing
