#include "fedecg/bundle.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include "fedecg/error.hpp"
#include "fedecg/protocol.hpp"

namespace fedecg {

std::string shape_to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

std::string_view to_string(ModelKind kind) {
  return kind == ModelKind::kAutoencoder ? "autoencoder" : "classifier";
}

std::string_view layer_of(std::string_view entry_name) {
  const auto dot = entry_name.rfind('.');
  return dot == std::string_view::npos ? entry_name : entry_name.substr(0, dot);
}

WeightBundle::WeightBundle(ModelKind kind, std::vector<BundleEntry> entries) : kind_(kind) {
  for (auto& e : entries) add(std::move(e.name), std::move(e.tensor));
}

void WeightBundle::add(std::string name, Tensor tensor) {
  require(find(name) == nullptr, ErrorCode::kInvalidArgument, "duplicate bundle entry '" + name + "'");
  entries_.push_back({std::move(name), std::move(tensor)});
}

const Tensor* WeightBundle::find(std::string_view name) const {
  auto it = std::find_if(entries_.begin(), entries_.end(), [&](const BundleEntry& e) { return e.name == name; });
  return it == entries_.end() ? nullptr : &it->tensor;
}

Tensor* WeightBundle::find(std::string_view name) {
  return const_cast<Tensor*>(std::as_const(*this).find(name));
}

const Tensor& WeightBundle::at(std::string_view name) const {
  const Tensor* t = find(name);
  if (t == nullptr) fail(ErrorCode::kUnknownLayer, "bundle has no entry '" + std::string(name) + "'");
  return *t;
}

Tensor& WeightBundle::at(std::string_view name) {
  return const_cast<Tensor&>(std::as_const(*this).at(name));
}

std::vector<std::string> WeightBundle::layer_names() const {
  std::vector<std::string> names;
  for (const auto& e : entries_) {
    const auto layer = layer_of(e.name);
    if (names.empty() || names.back() != layer) names.emplace_back(layer);
  }
  return names;
}

bool WeightBundle::has_layer(std::string_view layer) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const BundleEntry& e) { return layer_of(e.name) == layer; });
}

std::size_t WeightBundle::parameter_count() const {
  std::size_t total = 0;
  for (const auto& e : entries_) total += e.tensor.size();
  return total;
}

WeightBundle WeightBundle::select(std::span<const std::string> layers) const {
  WeightBundle out(kind_);
  for (const auto& e : entries_) {
    const auto layer = layer_of(e.name);
    if (std::find(layers.begin(), layers.end(), layer) != layers.end()) out.entries_.push_back(e);
  }
  return out;
}

WeightBundle WeightBundle::zeros_like() const {
  WeightBundle out(kind_);
  out.entries_.reserve(entries_.size());
  for (const auto& e : entries_) out.entries_.push_back({e.name, Tensor(e.tensor.shape())});
  return out;
}

bool WeightBundle::all_finite() const {
  return std::all_of(entries_.begin(), entries_.end(), [](const BundleEntry& e) { return e.tensor.all_finite(); });
}

bool bit_equal(const WeightBundle& a, const WeightBundle& b) {
  if (a.kind() != b.kind() || a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a.entries()[i];
    const auto& y = b.entries()[i];
    if (x.name != y.name || x.tensor.shape() != y.tensor.shape()) return false;
    if (std::memcmp(x.tensor.data(), y.tensor.data(), x.tensor.size() * sizeof(float)) != 0) return false;
  }
  return true;
}

std::vector<std::uint8_t> serialize_bundle(const WeightBundle& bundle) {
  return wire::encode_message(wire::make_model(bundle.kind(), 0, bundle));
}

WeightBundle deserialize_bundle(std::span<const std::uint8_t> bytes) {
  wire::Message msg = wire::decode_message(bytes);
  require(msg.type == wire::MessageType::kModel, ErrorCode::kMalformed,
          "bundle file holds a " + std::string(wire::to_string(msg.type)) + " message, expected MODEL");
  return std::move(msg.bundle);
}

void save_bundle(const WeightBundle& bundle, const std::filesystem::path& path) {
  const auto bytes = serialize_bundle(bundle);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(out.good(), ErrorCode::kIo, "failed writing " + path.string());
}

WeightBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_bundle(bytes);
}

std::uint64_t bundle_hash(const WeightBundle& bundle) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : serialize_bundle(bundle)) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

}  // namespace fedecg
