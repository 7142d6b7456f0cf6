#include "fedecg/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fedecg/error.hpp"
#include "fedecg/model.hpp"
#include "fedecg/random.hpp"

namespace fedecg {

namespace {

constexpr float kClampSlack = 1e-6f;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view field, const std::string& where) {
  field = trim(field);
  double value = 0.0;
  const char* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || field.empty()) {
    fail(ErrorCode::kParse, where + ": non-numeric field '" + std::string(field) + "'");
  }
  if (!std::isfinite(value)) fail(ErrorCode::kParse, where + ": non-finite value");
  return value;
}

BeatRecord parse_line(std::string_view line, const std::string& where) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (fields.size() != kBeatLength + 1) {
    fail(ErrorCode::kParse,
         where + ": expected " + std::to_string(kBeatLength + 1) + " fields, got " + std::to_string(fields.size()));
  }
  BeatRecord record;
  for (std::size_t t = 0; t < kBeatLength; ++t) {
    float v = static_cast<float>(parse_number(fields[t], where));
    if (v < 0.0f && v >= -kClampSlack) v = 0.0f;
    if (v > 1.0f && v <= 1.0f + kClampSlack) v = 1.0f;
    record.samples[t] = v;
  }
  const double label = parse_number(fields.back(), where);
  if (label != std::floor(label) || label < 0.0 || label >= static_cast<double>(kNumClasses)) {
    fail(ErrorCode::kParse, where + ": label '" + std::string(trim(fields.back())) + "' is not one of 0..4");
  }
  record.label = static_cast<std::uint8_t>(label);
  return record;
}

}  // namespace

std::array<std::size_t, kNumClasses> BeatDataset::histogram() const {
  std::array<std::size_t, kNumClasses> counts{};
  for (const auto& r : records) ++counts.at(r.label);
  return counts;
}

BeatDataset parse_csv(std::string_view text, const std::string& source) {
  BeatDataset out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (trim(line).empty()) continue;
    out.records.push_back(parse_line(line, source + ":" + std::to_string(line_no)));
  }
  return out;
}

BeatDataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_csv(buffer.str(), path.string());
}

std::string format_csv_line(const BeatRecord& record) {
  std::string line;
  line.reserve(kBeatLength * 12);
  char buf[32];
  for (float v : record.samples) {
    // Shortest representation that round-trips the float exactly.
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    line.append(buf, ptr);
    line.push_back(',');
  }
  line += std::to_string(record.label);
  line += ".0";
  return line;
}

void save_csv(const BeatDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  for (const auto& r : dataset.records) out << format_csv_line(r) << '\n';
  require(out.good(), ErrorCode::kIo, "failed writing " + path.string());
}

BeatDataset rebalance_upsample(const BeatDataset& dataset, std::uint64_t seed) {
  std::array<std::vector<std::size_t>, kNumClasses> by_class;
  for (std::size_t i = 0; i < dataset.size(); ++i) by_class[dataset.records[i].label].push_back(i);
  std::size_t majority = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    require(!by_class[c].empty(), ErrorCode::kEmptyClass,
            std::string("cannot rebalance: class ") + class_label(c) + " has no records");
    majority = std::max(majority, by_class[c].size());
  }
  BeatDataset out;
  out.provenance = dataset.provenance;
  out.seed = seed;
  out.records = dataset.records;
  out.records.reserve(majority * kNumClasses);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    Rng rng(derive_seed(seed, c));
    for (std::size_t k = by_class[c].size(); k < majority; ++k) {
      out.records.push_back(dataset.records[by_class[c][rng.below(by_class[c].size())]]);
    }
  }
  return out;
}

BeatDataset inject_noise(const BeatDataset& dataset, double level, std::uint64_t seed) {
  require(level >= 0.0 && level <= kMaxNoiseLevel, ErrorCode::kInvalidArgument,
          "noise level " + std::to_string(level) + " outside [0, 0.3]");
  BeatDataset out = dataset;
  out.seed = seed;
  if (level == 0.0) return out;
  out.provenance = {true, level};
  Rng rng(seed);
  for (auto& record : out.records) {
    for (float& x : record.samples) {
      const double noisy = static_cast<double>(x) + level * rng.uniform(-1.0, 1.0);
      x = static_cast<float>(std::clamp(noisy, 0.0, 1.0));
    }
  }
  return out;
}

namespace {

BeatDataset gather(const BeatDataset& source, std::span<const std::size_t> indices) {
  BeatDataset out;
  out.provenance = source.provenance;
  out.seed = source.seed;
  out.records.reserve(indices.size());
  for (std::size_t i : indices) out.records.push_back(source.records[i]);
  return out;
}

}  // namespace

std::vector<EdgePartition> partition_edges(const BeatDataset& dataset, std::span<const double> noise_levels,
                                           std::uint64_t seed) {
  const std::size_t n_edges = noise_levels.size();
  require(n_edges >= 1, ErrorCode::kInvalidArgument, "need at least one edge");
  require(dataset.size() >= n_edges * 10, ErrorCode::kInvalidArgument,
          "dataset of " + std::to_string(dataset.size()) + " records is too small for " + std::to_string(n_edges) +
              " edges");
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, 0x5eed));
  rng.shuffle(std::span<std::size_t>(order));

  const std::size_t shard = dataset.size() / n_edges;
  std::vector<EdgePartition> parts(n_edges);
  for (std::size_t e = 0; e < n_edges; ++e) {
    auto& part = parts[e];
    part.edge_id = static_cast<std::uint32_t>(e + 1);
    part.noise_level = noise_levels[e];
    // The last shard absorbs the remainder so the shards cover the dataset.
    const std::size_t begin = e * shard;
    const std::size_t end = e + 1 == n_edges ? dataset.size() : begin + shard;
    const std::size_t n_train = ((end - begin) * 4 + 2) / 5;
    part.train_indices.assign(order.begin() + begin, order.begin() + begin + n_train);
    part.test_indices.assign(order.begin() + begin + n_train, order.begin() + end);
    part.train_clean = gather(dataset, part.train_indices);
    part.test_clean = gather(dataset, part.test_indices);
    const std::uint64_t edge_seed = derive_seed(seed, 100 + e);
    part.train_noisy = inject_noise(part.train_clean, part.noise_level, derive_seed(edge_seed, 1));
    part.test_noisy = inject_noise(part.test_clean, part.noise_level, derive_seed(edge_seed, 2));
  }
  return parts;
}

void write_partition_manifest(std::span<const EdgePartition> partitions, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out << "# edge_id split record_index noise_level\n";
  for (const auto& part : partitions) {
    for (std::size_t i : part.train_indices) out << part.edge_id << " train " << i << ' ' << part.noise_level << '\n';
    for (std::size_t i : part.test_indices) out << part.edge_id << " test " << i << ' ' << part.noise_level << '\n';
  }
  require(out.good(), ErrorCode::kIo, "failed writing " + path.string());
}

Tensor pad_beat(std::span<const float> samples) {
  require(samples.size() == kBeatLength, ErrorCode::kShapeMismatch,
          "beat must have " + std::to_string(kBeatLength) + " samples, got " + std::to_string(samples.size()));
  Tensor out({1, kInputLength});
  std::copy(samples.begin(), samples.end(), out.values().begin());
  return out;
}

Tensor pad_beat(const BeatRecord& record) { return pad_beat(std::span<const float>(record.samples)); }

std::array<float, kBeatLength> crop_beat(const Tensor& padded) {
  require(padded.size() >= kBeatLength, ErrorCode::kShapeMismatch, "tensor is shorter than a beat");
  std::array<float, kBeatLength> out{};
  std::copy_n(padded.values().begin(), kBeatLength, out.begin());
  return out;
}

}  // namespace fedecg
