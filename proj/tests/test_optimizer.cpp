#include <doctest.h>

#include <cmath>

#include "fedecg/bundle.hpp"
#include "fedecg/error.hpp"
#include "fedecg/optimizer.hpp"

using namespace fedecg;

namespace {

WeightBundle two_layer_bundle(float value) {
  WeightBundle b(ModelKind::kClassifier);
  b.add("a.kernel", Tensor({3}, value));
  b.add("b.kernel", Tensor({2}, value));
  return b;
}

}  // namespace

TEST_SUITE("optimizer") {
  TEST_CASE("zero gradient leaves parameters unchanged") {
    WeightBundle p = two_layer_bundle(0.5f);
    const WeightBundle before = p;
    RmsProp opt(p);
    opt.step(p, p.zeros_like(), {true, true});
    CHECK(bit_equal(p, before));
  }

  TEST_CASE("first step from fresh state") {
    WeightBundle p = two_layer_bundle(0.0f);
    WeightBundle g = two_layer_bundle(1.0f);
    RmsProp opt(p);
    opt.set_learning_rate(0.01);
    opt.step(p, g, {true, true});
    const double expected = -0.01 / (std::sqrt(0.1) + 1e-8);
    CHECK(expected == doctest::Approx(-0.0316228).epsilon(1e-6));
    for (float v : p.at("a.kernel").values()) CHECK(v == doctest::Approx(expected).epsilon(1e-6));
    CHECK(opt.accumulators()[0][0] == doctest::Approx(0.1));
  }

  TEST_CASE("second step uses the decayed accumulator") {
    WeightBundle p = two_layer_bundle(0.0f);
    const WeightBundle g = two_layer_bundle(2.0f);
    RmsProp opt(p);
    opt.step(p, g, {true, true});
    opt.step(p, g, {true, true});
    const double s1 = 0.1 * 4.0, s2 = 0.9 * s1 + 0.1 * 4.0;
    const double expected = -0.01 * 2.0 / (std::sqrt(s1) + 1e-8) - 0.01 * 2.0 / (std::sqrt(s2) + 1e-8);
    CHECK(p.at("b.kernel")[0] == doctest::Approx(expected).epsilon(1e-6));
  }

  TEST_CASE("frozen entries stay byte-identical") {
    WeightBundle p = two_layer_bundle(0.25f);
    const WeightBundle before = p;
    RmsProp opt(p);
    opt.step(p, two_layer_bundle(1.0f), {false, true});
    CHECK(p.at("a.kernel") == before.at("a.kernel"));
    CHECK_FALSE(p.at("b.kernel") == before.at("b.kernel"));
  }

  TEST_CASE("mismatched gradients are rejected") {
    WeightBundle p = two_layer_bundle(0.0f);
    RmsProp opt(p);
    WeightBundle g(ModelKind::kClassifier);
    g.add("a.kernel", Tensor({3}));
    CHECK_THROWS_AS(opt.step(p, g, {true, true}), Error);
  }

  TEST_CASE("learning-rate schedule") {
    CHECK(lr_schedule(1, 0.5) == 0.01);
    CHECK(lr_schedule(10, 0.01) == 0.01);
    CHECK(lr_schedule(40, 0.003) == 0.01);
    const double lr41 = lr_schedule(41, 0.01);
    CHECK(std::abs(lr41 - 0.0090484) < 1e-7);
    CHECK(std::abs(lr_schedule(42, lr41) - 0.0081873) < 1e-7);
    CHECK(lr41 == 0.01 * std::exp(-0.1));
    CHECK_THROWS_AS(lr_schedule(0, 0.01), Error);
  }
}
