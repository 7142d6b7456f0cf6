#include <doctest.h>

#include <cmath>

#include "fedecg/error.hpp"
#include "fedecg/layers.hpp"
#include "fedecg/loss.hpp"
#include "support/gradcheck.hpp"

using namespace fedecg;
using namespace fedecg::nn;

namespace {

Tensor64 vec(std::initializer_list<double> v) { return Tensor64({v.size()}, std::vector<double>(v)); }
Tensor64 row(std::initializer_list<double> v) { return Tensor64({1, v.size()}, std::vector<double>(v)); }

}  // namespace

TEST_SUITE("layers") {
  TEST_CASE("conv1d zero pads at both ends") {
    const Tensor64 k({1, 1, 3}, std::vector<double>{1, 0, -1});
    const Tensor64 y = nn::conv1d(row({1, 2, 3}), k, Tensor64({1}));
    CHECK(y == row({-2, -2, 2}));
  }

  TEST_CASE("conv1d with zero weights outputs zeros") {
    Rng rng(3);
    const Tensor64 x = testing::random_tensor({4, 9}, rng);
    const Tensor64 y = nn::conv1d(x, Tensor64({6, 4, 3}), Tensor64({6}));
    CHECK(y.shape() == Shape{6, 9});
    for (double v : y.values()) CHECK(v == 0.0);
  }

  TEST_CASE("conv parameter count") {
    CHECK(nn::conv_parameter_count(1, 16) == 64);
    CHECK(nn::conv_parameter_count(64, 64) == 12352);
    CHECK(nn::dense_parameter_count(1536, 128) == 196736);
  }

  TEST_CASE("conv1d rejects mismatched shapes") {
    CHECK_THROWS_AS(nn::conv1d(row({1, 2}), Tensor64({1, 2, 3}), Tensor64({1})), Error);
    CHECK_THROWS_AS(nn::conv1d(row({1, 2}), Tensor64({1, 1, 3}), Tensor64({2})), Error);
  }

  TEST_CASE("conv1d backward") {
    SUBCASE("zero upstream gradient gives zero gradients") {
      Rng rng(5);
      const Tensor64 x = testing::random_tensor({2, 7}, rng);
      const Tensor64 k = testing::random_tensor({3, 2, 3}, rng);
      const auto g = nn::conv1d_backward(Tensor64({3, 7}), x, k);
      for (const Tensor64* t : {&g.input, &g.kernel, &g.bias})
        for (double v : t->values()) CHECK(v == 0.0);
    }
    SUBCASE("scalar case: the centre tap sees the single input") {
      const double x = 1.7, w = -0.4, go = 2.5;
      const Tensor64 k({1, 1, 3}, std::vector<double>{0.3, w, 0.9});
      const auto g = nn::conv1d_backward(row({go}), row({x}), k);
      CHECK(g.kernel[1] == doctest::Approx(go * x));
      CHECK(g.kernel[0] == 0.0);  // taps that only ever see padding
      CHECK(g.kernel[2] == 0.0);
      CHECK(g.input[0] == doctest::Approx(go * w));
      CHECK(g.bias[0] == doctest::Approx(go));
    }
    SUBCASE("missing forward cache is rejected") {
      CHECK_THROWS_AS(nn::conv1d_backward(row({1.0}), Tensor64(), Tensor64({1, 1, 3})), Error);
    }
  }

  TEST_CASE("maxpool1d") {
    const auto pooled = nn::maxpool1d(row({1, 3, 2, 0}));
    CHECK(pooled.output == row({3, 2}));
    CHECK(nn::maxpool1d_backward(row({1, 1}), pooled.argmax, Shape{1, 4}) == row({0, 1, 1, 0}));

    const auto flat = nn::maxpool1d(row({5, 5, 5, 5}));
    CHECK(flat.output == row({5, 5}));
    CHECK(flat.argmax == std::vector<std::uint32_t>{0, 2});  // first index wins ties

    CHECK_THROWS_AS(nn::maxpool1d(row({1, 2, 3})), Error);
  }

  TEST_CASE("upsample1d") {
    CHECK(nn::upsample1d(row({1, 2})) == row({1, 1, 2, 2}));
    CHECK(nn::upsample1d_backward(row({1, 2, 3, 4})) == row({3, 7}));
    const Tensor64 c({3, 8}, 0.25);
    CHECK(nn::upsample1d(nn::maxpool1d(c).output) == c);
  }

  TEST_CASE("dense") {
    const Tensor64 w({2, 2}, std::vector<double>{1, 2, 3, 4});
    CHECK(nn::dense(vec({1, 1}), w, Tensor64({2})) == vec({3, 7}));
    const Tensor64 eye({3, 3}, std::vector<double>{1, 0, 0, 0, 1, 0, 0, 0, 1});
    CHECK(nn::dense(vec({0.5, -2, 9}), eye, Tensor64({3})) == vec({0.5, -2, 9}));
    CHECK_THROWS_AS(nn::dense(vec({1, 2, 3}), w, Tensor64({2})), Error);
  }

  TEST_CASE("relu") {
    CHECK(nn::relu(vec({-1, 0, 2})) == vec({0, 0, 2}));
    CHECK(nn::relu(vec({0.1, 3})) == vec({0.1, 3}));
    CHECK(nn::relu_backward(vec({7, 7, 7}), vec({-1, 0, 2})) == vec({0, 0, 7}));
  }

  TEST_CASE("softmax") {
    const Tensor64 uniform = nn::softmax(Tensor64(Shape{5}, 0.0));
    for (double v : uniform.values()) CHECK(v == doctest::Approx(0.2));
    const Tensor64 p = nn::softmax(vec({std::log(2.0), 0.0}));
    CHECK(p[0] == doctest::Approx(2.0 / 3.0));
    CHECK(p[1] == doctest::Approx(1.0 / 3.0));

    const Tensor p1 = nn::softmax(Tensor({5}, std::vector<float>{0.3f, -1.f, 2.f, 0.f, 0.5f}));
    const Tensor p2 = nn::softmax(Tensor({5}, std::vector<float>{100.3f, 99.f, 102.f, 100.f, 100.5f}));
    for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(p1[i] - p2[i]) <= 1e-6f);

    const Tensor64 big = nn::softmax(vec({1000, 0}));
    CHECK(big.all_finite());
    CHECK_THROWS_AS(nn::softmax(vec({1.0})), Error);
  }

  TEST_CASE("cross entropy") {
    CHECK(cross_entropy(vec({0, 1, 0, 0, 0}), 1) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(cross_entropy(Tensor64({5}, 0.2), 3) == doctest::Approx(std::log(5.0)));
    CHECK(std::isfinite(cross_entropy(vec({1, 0, 0, 0, 0}), 4)));  // floored, not infinite
    CHECK(softmax_cross_entropy_grad(Tensor64({5}, 0.2), 0) == vec({-0.8, 0.2, 0.2, 0.2, 0.2}));
    CHECK_THROWS_AS(cross_entropy(Tensor64({5}, 0.2), 5), Error);
  }

  TEST_CASE("reconstruction loss") {
    const Tensor64 a = row({0.1, 0.7});
    CHECK(reconstruction_loss(a, a, ReconstructionMode::kMse) == 0.0);
    CHECK(reconstruction_loss(a, a, ReconstructionMode::kMae) == 0.0);
    CHECK(reconstruction_loss(row({0, 0}), row({1, 1}), ReconstructionMode::kMse) == 1.0);
    CHECK(reconstruction_loss(row({0, 0}), row({1, 1}), ReconstructionMode::kMae) == 1.0);
    CHECK_THROWS_AS(reconstruction_loss(row({0}), row({1, 1}), ReconstructionMode::kMse), Error);
  }

  TEST_CASE("every layer's backward matches central finite differences") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      for (const auto& [kind, err] : testing::check_layer_gradients(seed)) {
        INFO(kind << " seed " << seed);
        CHECK(err < (kind == "mse" ? 1e-6 : 1e-4));
      }
    }
  }
}
