#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <set>

#include "fedecg/data.hpp"
#include "fedecg/error.hpp"
#include "fedecg/model.hpp"
#include "fedecg/synthetic.hpp"

using namespace fedecg;

namespace {

std::string zero_line(const std::string& label) {
  std::string s;
  for (std::size_t i = 0; i < kBeatLength; ++i) s += "0,";
  return s + label;
}

BeatDataset with_counts(std::array<std::size_t, kNumClasses> counts, std::uint64_t seed = 1) {
  return synthesize_dataset(counts, seed);
}

bool same_multiset(std::vector<BeatRecord> a, std::vector<BeatRecord> b) {
  auto less = [](const BeatRecord& x, const BeatRecord& y) {
    return std::tie(x.label, x.samples) < std::tie(y.label, y.samples);
  };
  std::sort(a.begin(), a.end(), less);
  std::sort(b.begin(), b.end(), less);
  return a == b;
}

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("csv parsing") {
    const BeatDataset d = parse_csv(zero_line("0.0") + "\n");
    REQUIRE(d.size() == 1);
    CHECK(d.records[0].label == 0);
    for (float v : d.records[0].samples) CHECK(v == 0.0f);

    std::string short_line;
    for (int i = 0; i < 149; ++i) short_line += "0.5,";
    short_line += "1.0";
    try {
      parse_csv(zero_line("1.0") + "\n" + short_line + "\n", "beats.csv");
      FAIL("short line accepted");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kParse);
      CHECK(std::string(e.what()).find("beats.csv:2") != std::string::npos);
      CHECK(std::string(e.what()).find("150") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_csv(zero_line("5.0")), Error);
    CHECK_THROWS_AS(parse_csv(zero_line("1.5")), Error);
    CHECK_THROWS_AS(parse_csv(zero_line("abc")), Error);
    CHECK(parse_csv(zero_line("4") + "\r\n\n").records[0].label == 4);
  }

  TEST_CASE("csv save/load round trip is exact") {
    const BeatDataset d = with_counts({5, 2, 2, 1, 2});
    const auto path = std::filesystem::temp_directory_path() / "fedecg_test_beats.csv";
    save_csv(d, path);
    const BeatDataset back = load_csv(path);
    CHECK(back.records == d.records);
    std::filesystem::remove(path);
  }

  TEST_CASE("MIT-BIH train CSV histogram, when available") {
    const char* path = std::getenv("FEDECG_MITBIH_CSV");
    if (!path) return;
    const auto h = load_csv(path).histogram();
    CHECK(std::max_element(h.begin(), h.end()) - h.begin() == 0);  // N dominant
    CHECK(std::min_element(h.begin(), h.end()) - h.begin() == 3);  // F rarest
  }

  TEST_CASE("rebalance upsamples minorities to the majority count") {
    const BeatDataset d = with_counts({100, 10, 1, 1, 1});
    const BeatDataset b = rebalance_upsample(d, 3);
    for (std::size_t c : b.histogram()) CHECK(c == 100);
    // originals preserved, extras are copies of same-class originals
    CHECK(std::equal(d.records.begin(), d.records.end(), b.records.begin()));
    for (std::size_t i = d.size(); i < b.size(); ++i) {
      CHECK(std::find(d.records.begin(), d.records.end(), b.records[i]) != d.records.end());
    }
    CHECK(rebalance_upsample(d, 3).records == b.records);

    const BeatDataset balanced = with_counts({7, 7, 7, 7, 7});
    CHECK(same_multiset(rebalance_upsample(balanced, 9).records, balanced.records));

    CHECK_THROWS_AS(rebalance_upsample(with_counts({5, 0, 1, 1, 1}), 1), Error);
  }

  TEST_CASE("noise injection") {
    const BeatDataset d = with_counts({50, 10, 10, 10, 10});
    CHECK(inject_noise(d, 0.0, 5).records == d.records);

    const BeatDataset n = inject_noise(d, 0.2, 5);
    CHECK(n.provenance.noisy);
    CHECK(n.provenance.level == 0.2);
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t r = 0; r < d.size(); ++r) {
      for (std::size_t t = 0; t < kBeatLength; ++t) {
        const float x = d.records[r].samples[t], y = n.records[r].samples[t];
        CHECK((y >= 0.0f && y <= 1.0f));
        if (x > 0.2f && x < 0.8f) {  // interior: the clamp never engages
          sum += std::abs(y - x);
          ++count;
        }
      }
    }
    REQUIRE(count > 1000);
    CHECK(sum / static_cast<double>(count) == doctest::Approx(0.1).epsilon(0.05));
    CHECK(inject_noise(d, 0.2, 5).records == n.records);
    CHECK_THROWS_AS(inject_noise(d, 0.31, 5), Error);
    CHECK_THROWS_AS(inject_noise(d, -0.1, 5), Error);
  }

  TEST_CASE("edge partitioning") {
    const BeatDataset d = with_counts({600, 600, 600, 600, 600});
    const std::vector<double> noise = {0.2, 0.3, 0.1};
    const auto parts = partition_edges(d, noise, 8);
    REQUIRE(parts.size() == 3);
    std::set<std::size_t> seen;
    std::size_t total = 0;
    for (std::size_t e = 0; e < 3; ++e) {
      const auto& p = parts[e];
      CHECK(p.edge_id == e + 1);
      CHECK(p.noise_level == noise[e]);
      CHECK(p.train_indices.size() == 800);
      CHECK(p.test_indices.size() == 200);
      CHECK(p.train_noisy.size() == 800);
      CHECK(p.test_noisy.provenance.level == noise[e]);
      for (std::size_t i = 0; i < 800; ++i) CHECK(p.train_clean.records[i] == d.records[p.train_indices[i]]);
      for (std::size_t i : p.train_indices) seen.insert(i);
      for (std::size_t i : p.test_indices) seen.insert(i);
      total += p.train_indices.size() + p.test_indices.size();
    }
    CHECK(total == d.size());
    CHECK(seen.size() == d.size());  // disjoint and covering

    const auto again = partition_edges(d, noise, 8);
    CHECK(again[1].test_noisy.records == parts[1].test_noisy.records);
    CHECK_THROWS_AS(partition_edges(d, std::vector<double>{}, 8), Error);
  }

  TEST_CASE("uneven shard sizes still cover the dataset") {
    const BeatDataset d = with_counts({21, 20, 20, 20, 20});
    const std::vector<double> noise = {0.1, 0.1};
    const auto parts = partition_edges(d, noise, 1);
    CHECK(parts[0].train_indices.size() + parts[0].test_indices.size() == 50);
    CHECK(parts[1].train_indices.size() + parts[1].test_indices.size() == 51);
  }

  TEST_CASE("pad and crop") {
    BeatRecord r;
    for (std::size_t t = 0; t < kBeatLength; ++t) r.samples[t] = static_cast<float>(t) / 200.0f;
    const Tensor p = pad_beat(r);
    CHECK(p.shape() == Shape{1, kInputLength});
    for (std::size_t t = kBeatLength; t < kInputLength; ++t) CHECK(p[t] == 0.0f);
    CHECK(crop_beat(p) == r.samples);
    const Tensor blank = pad_beat(BeatRecord{});
    for (float v : blank.values()) CHECK(v == 0.0f);
    CHECK_THROWS_AS(pad_beat(std::vector<float>(10)), Error);
  }

  TEST_CASE("synthetic beats look like the preprocessed CSV") {
    const auto counts = mitbih_like_counts(1000);
    std::size_t total = 0;
    for (std::size_t c : counts) {
      CHECK(c >= 1);
      total += c;
    }
    CHECK(total == 1000);
    CHECK(counts[0] > counts[4]);
    CHECK(counts[3] == *std::min_element(counts.begin(), counts.end()));

    const BeatDataset d = synthesize_dataset(counts, 3);
    CHECK(d.histogram() == counts);
    for (const auto& r : d.records) {
      const auto [lo, hi] = std::minmax_element(r.samples.begin(), r.samples.end());
      CHECK(*lo >= 0.0f);
      CHECK(*hi == 1.0f);
      CHECK(r.samples.back() == 0.0f);  // zero padded tail
    }
    CHECK(synthesize_dataset(counts, 3).records == d.records);
  }
}
