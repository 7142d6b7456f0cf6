#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fedecg/classes.hpp"
#include "fedecg/tensor.hpp"

namespace fedecg {

inline constexpr std::size_t kBeatLength = 187;
inline constexpr double kMaxNoiseLevel = 0.3;

struct BeatRecord {
  std::array<float, kBeatLength> samples{};
  std::uint8_t label = 0;  // index into kClassLabels

  friend bool operator==(const BeatRecord&, const BeatRecord&) = default;
};

struct Provenance {
  bool noisy = false;
  double level = 0.0;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct BeatDataset {
  std::vector<BeatRecord> records;
  Provenance provenance;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }
  std::array<std::size_t, kNumClasses> histogram() const;
};

/// One edge's shard: disjoint 80/20 train/test splits, each kept both clean and noisy.
struct EdgePartition {
  std::uint32_t edge_id = 0;
  double noise_level = 0.0;
  std::vector<std::size_t> train_indices;  // into the partitioned dataset
  std::vector<std::size_t> test_indices;
  BeatDataset train_clean;
  BeatDataset train_noisy;
  BeatDataset test_clean;
  BeatDataset test_noisy;
};

/// 188 comma-separated numbers per line, last is the label 0..4; no header.
BeatDataset load_csv(const std::filesystem::path& path);
BeatDataset parse_csv(std::string_view text, const std::string& source = "<memory>");
void save_csv(const BeatDataset& dataset, const std::filesystem::path& path);
std::string format_csv_line(const BeatRecord& record);

/// Resamples minority classes with replacement until every class matches the majority count.
BeatDataset rebalance_upsample(const BeatDataset& dataset, std::uint64_t seed);

/// x' = clamp(x + level * u, 0, 1), u ~ U[-1, 1] i.i.d. per sample.
BeatDataset inject_noise(const BeatDataset& dataset, double level, std::uint64_t seed);

/// Seeded shuffle into equal disjoint shards, 80/20 split, per-shard noise.
std::vector<EdgePartition> partition_edges(const BeatDataset& dataset, std::span<const double> noise_levels,
                                           std::uint64_t seed);

/// Plain-text manifest: one line per record with edge id, split, source index and noise level.
void write_partition_manifest(std::span<const EdgePartition> partitions, const std::filesystem::path& path);

/// 1 x 192 tensor with the 5 trailing samples zeroed.
Tensor pad_beat(const BeatRecord& record);
Tensor pad_beat(std::span<const float> samples);
/// Drops the padding again: first 187 samples of a 1 x 192 tensor.
std::array<float, kBeatLength> crop_beat(const Tensor& padded);

}  // namespace fedecg
