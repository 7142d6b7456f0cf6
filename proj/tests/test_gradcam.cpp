#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fedecg/bundle.hpp"
#include "fedecg/error.hpp"
#include "fedecg/gradcam.hpp"
#include "fedecg/synthetic.hpp"

using namespace fedecg;

namespace {

GradCamTap single_map(std::vector<float> a, float alpha) {
  GradCamTap tap;
  const std::size_t n = a.size();
  tap.activations = Tensor({1, n}, std::move(a));
  tap.alphas = {alpha};
  return tap;
}

Model zero_biased(Model m) {
  for (auto& e : m.weights().entries())
    if (e.name.ends_with(".bias")) e.tensor.fill(0.0f);
  return m;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_SUITE("gradcam") {
  TEST_CASE("alphas are time-averaged gradients") {
    CHECK(gradcam_alphas(Tensor({1, 3}, 1.0f)) == std::vector<float>{1.0f});
    CHECK(gradcam_alphas(Tensor({2, 2}, std::vector<float>{1, 3, -2, 0})) == std::vector<float>{2.0f, -1.0f});
    CHECK_THROWS_AS(gradcam_alphas(Tensor({4})), Error);
  }

  TEST_CASE("combining feature maps") {
    CHECK(combine_heatmap(single_map({1, 2, 3}, 1.0f)) == std::vector<float>{1, 2, 3});
    CHECK(combine_heatmap(single_map({1, 2, 3}, -1.0f)) == std::vector<float>{0, 0, 0});
    GradCamTap two;
    two.activations = Tensor({2, 2}, std::vector<float>{1, 0, 0, 1});
    two.alphas = {2, 3};
    CHECK(combine_heatmap(two) == std::vector<float>{2, 3});
    two.alphas = {1};
    CHECK_THROWS_AS(combine_heatmap(two), Error);
  }

  TEST_CASE("upsampling") {
    const std::vector<float> flat(24, 0.7f);
    for (float v : upsample_heatmap(flat, 187)) CHECK(v == doctest::Approx(0.7f));

    const auto ramp = upsample_heatmap(std::vector<float>{0, 1}, 4);
    CHECK(ramp.size() == 4);
    CHECK(std::is_sorted(ramp.begin(), ramp.end()));

    Rng rng(1);
    std::vector<float> raw(24);
    for (float& v : raw) v = static_cast<float>(rng.uniform());
    const auto up = upsample_heatmap(raw, 187);
    CHECK(up.size() == 187);
    const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
    for (float v : up) CHECK((v >= *lo && v <= *hi));
    CHECK(up[0] == raw[0]);
    CHECK(up[3] == raw[0]);  // left of the first segment centre: held flat
    CHECK_THROWS_AS(upsample_heatmap(raw, 10), Error);
    CHECK_THROWS_AS(upsample_heatmap(std::vector<float>{}, 10), Error);
  }

  TEST_CASE("grad_cam on a zero input through a zero-bias network") {
    const Model clf = zero_biased(build_classifier(3));
    const GradCamTap tap = grad_cam(clf, Tensor({1, kInputLength}), 2);
    CHECK(tap.activations.shape() == Shape{64, 24});
    CHECK(tap.normalization == 24);
    for (float v : tap.activations.values()) CHECK(v == 0.0f);
    for (float a : tap.alphas) CHECK(a == 0.0f);
  }

  TEST_CASE("grad_cam leaves the model untouched and checks its target") {
    const Model clf = build_classifier(3);
    const auto before = bundle_hash(clf.weights());
    const BeatRecord beat = synthesize_dataset({0, 0, 1, 0, 0}, 4).records[0];
    const GradCamTap tap = grad_cam(clf, pad_beat(beat), 1);
    CHECK(bundle_hash(clf.weights()) == before);
    CHECK(tap.gradients.shape() == tap.activations.shape());
    CHECK_THROWS_AS(grad_cam(clf, pad_beat(beat), 5), Error);
    CHECK_THROWS_AS(grad_cam(build_autoencoder(1), pad_beat(beat), 0), Error);
  }

  TEST_CASE("alphas match a finite-difference derivative of the logit") {
    // Each alpha is the time-mean of d y_c / d A[k][t]; differences are taken
    // one element at a time so the step does not cross ReLU kinks downstream.
    const Model clf = build_classifier(8);
    const BeatRecord beat = synthesize_dataset({1, 0, 0, 0, 0}, 2).records[0];
    const GradCamTap tap = grad_cam(clf, pad_beat(beat), 0);
    const std::size_t tap_layer = last_conv_activation_layer(clf.spec());
    auto logit = [&](const Tensor& a) {
      Model::Trace t;
      return static_cast<double>(clf.forward(a, t, tap_layer)[0]);
    };
    const std::size_t steps = tap.activations.dim(1);
    int agree = 0;
    for (std::size_t k = 0; k < 8; ++k) {
      double numeric = 0.0;
      for (std::size_t t = 0; t < steps; ++t) {
        Tensor up = tap.activations, down = tap.activations;
        const float h = 1e-3f;
        up.row(k)[t] += h;
        down.row(k)[t] -= h;
        numeric += (logit(up) - logit(down)) / (2.0 * h);
      }
      numeric /= static_cast<double>(steps);
      if (std::abs(numeric - tap.alphas[k]) <= 1e-2 * std::abs(numeric) + 1e-5) ++agree;
    }
    CHECK(agree >= 7);
  }

  TEST_CASE("explain produces aligned, nonnegative output") {
    const Model clf = build_classifier(5);
    const Model ae = build_autoencoder(5);
    const BeatRecord beat = synthesize_dataset({0, 1, 0, 0, 0}, 6).records[0];
    const Heatmap h = explain(clf, ae, beat);
    CHECK(h.raw.size() == 24);
    CHECK(h.upsampled.size() == 187);
    CHECK(h.overlay_signal.size() == 187);
    CHECK(h.class_index == predict(clf, pad_beat(beat)).predicted_class);
    for (float v : h.upsampled) CHECK(v >= 0.0f);
    CHECK(explain(clf, ae, beat, 3).class_index == 3);
    CHECK_THROWS_AS(explain(ae, ae, beat), Error);
  }

  TEST_CASE("an all-zero classifier explains nothing") {
    Model clf = build_classifier(1);
    for (auto& e : clf.weights().entries()) e.tensor.fill(0.0f);
    const BeatRecord beat = synthesize_dataset({1, 0, 0, 0, 0}, 2).records[0];
    const Heatmap h = explain(clf, build_autoencoder(1), beat, 0);
    for (float v : h.upsampled) CHECK(v == 0.0f);
    CHECK(heatmap_svg(h).find("rgb(255,0,0)") == std::string::npos);
    CHECK(heatmap_svg(h).find("rgb(0,0,255)") != std::string::npos);
  }

  TEST_CASE("export formats") {
    const Model clf = build_classifier(5);
    const Model ae = build_autoencoder(5);
    const BeatRecord beat = synthesize_dataset({0, 0, 0, 1, 0}, 7).records[0];
    const Heatmap h = explain(clf, ae, beat);
    const auto dir = std::filesystem::temp_directory_path();
    export_heatmap(h, dir / "fedecg_hm.csv", HeatmapFormat::kCsv);
    export_heatmap(h, dir / "fedecg_hm.svg", HeatmapFormat::kSvg);
    const std::string csv = slurp(dir / "fedecg_hm.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 188);
    CHECK(csv.rfind("t,signal,importance\n", 0) == 0);
    const std::string svg = slurp(dir / "fedecg_hm.svg");
    CHECK(svg.find("viewBox=\"0 0 800 300\"") != std::string::npos);
    CHECK(std::count(svg.begin(), svg.end(), '\n') > 186);
    export_heatmap(h, dir / "fedecg_hm.svg", HeatmapFormat::kSvg);
    CHECK(slurp(dir / "fedecg_hm.svg") == svg);
    CHECK_THROWS_AS(export_heatmap(h, dir / "no_such_dir" / "x.csv", HeatmapFormat::kCsv), Error);
  }
}
