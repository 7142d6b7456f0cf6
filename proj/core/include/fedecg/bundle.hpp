#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedecg/tensor.hpp"

namespace fedecg {

/// Which model a bundle belongs to. Doubles as the protocol tier (0 AE, 1 CLF).
enum class ModelKind : std::uint8_t { kAutoencoder = 0, kClassifier = 1 };

std::string_view to_string(ModelKind kind);

struct BundleEntry {
  std::string name;  // "<layer>.kernel" or "<layer>.bias"
  Tensor tensor;
};

/// Ordered, named parameter arrays for one model. Entry order follows layer order.
class WeightBundle {
 public:
  WeightBundle() = default;
  explicit WeightBundle(ModelKind kind) : kind_(kind) {}
  WeightBundle(ModelKind kind, std::vector<BundleEntry> entries);

  ModelKind kind() const noexcept { return kind_; }
  void set_kind(ModelKind kind) noexcept { kind_ = kind; }

  const std::vector<BundleEntry>& entries() const noexcept { return entries_; }
  std::vector<BundleEntry>& entries() noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  void add(std::string name, Tensor tensor);

  const Tensor* find(std::string_view name) const;
  Tensor* find(std::string_view name);
  const Tensor& at(std::string_view name) const;
  Tensor& at(std::string_view name);

  /// Distinct layer names in entry order.
  std::vector<std::string> layer_names() const;
  bool has_layer(std::string_view layer) const;

  std::size_t parameter_count() const;

  /// Copy keeping only entries whose layer is in `layers`; order preserved.
  WeightBundle select(std::span<const std::string> layers) const;

  /// Same zero-filled shapes, for gradient accumulation.
  WeightBundle zeros_like() const;

  bool all_finite() const;

 private:
  ModelKind kind_ = ModelKind::kAutoencoder;
  std::vector<BundleEntry> entries_;
};

/// Layer part of an entry name: "conv1.kernel" -> "conv1".
std::string_view layer_of(std::string_view entry_name);

/// Exact bitwise equality of kind, names, shapes and values.
bool bit_equal(const WeightBundle& a, const WeightBundle& b);

/// Wire payload of a MODEL message carrying the bundle (the .fwb file layout).
std::vector<std::uint8_t> serialize_bundle(const WeightBundle& bundle);
WeightBundle deserialize_bundle(std::span<const std::uint8_t> bytes);

void save_bundle(const WeightBundle& bundle, const std::filesystem::path& path);
WeightBundle load_bundle(const std::filesystem::path& path);

/// FNV-1a over the serialized form.
std::uint64_t bundle_hash(const WeightBundle& bundle);
std::string hash_hex(std::uint64_t hash);

}  // namespace fedecg
