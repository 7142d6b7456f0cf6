#include "fedecg/protocol.hpp"

#include <bit>
#include <cstring>
#include <limits>

#include "fedecg/error.hpp"

namespace fedecg::wire {

static_assert(std::endian::native == std::endian::little, "wire codec assumes a little-endian host");

std::string_view to_string(MessageType type) {
  switch (type) {
    case MessageType::kRegister: return "REGISTER";
    case MessageType::kModel: return "MODEL";
    case MessageType::kUpdate: return "UPDATE";
    case MessageType::kAck: return "ACK";
    case MessageType::kShutdown: return "SHUTDOWN";
  }
  return "UNKNOWN";
}

bool operator==(const Message& a, const Message& b) {
  return a.type == b.type && a.tier == b.tier && a.round == b.round && a.client_id == b.client_id &&
         a.n_samples == b.n_samples && bit_equal(a.bundle, b.bundle);
}

Message make_register(ModelKind tier, std::uint32_t round, std::uint32_t client_id) {
  Message m;
  m.type = MessageType::kRegister;
  m.tier = tier;
  m.round = round;
  m.client_id = client_id;
  m.bundle.set_kind(tier);
  return m;
}

Message make_model(ModelKind tier, std::uint32_t round, WeightBundle bundle) {
  Message m;
  m.type = MessageType::kModel;
  m.tier = tier;
  m.round = round;
  m.bundle = std::move(bundle);
  m.bundle.set_kind(tier);
  return m;
}

Message make_update(ModelKind tier, std::uint32_t round, std::uint64_t n_samples, WeightBundle bundle) {
  Message m = make_model(tier, round, std::move(bundle));
  m.type = MessageType::kUpdate;
  m.n_samples = n_samples;
  return m;
}

Message make_ack(ModelKind tier, std::uint32_t round) {
  Message m;
  m.type = MessageType::kAck;
  m.tier = tier;
  m.round = round;
  m.bundle.set_kind(tier);
  return m;
}

Message make_shutdown(std::uint32_t round) {
  Message m;
  m.type = MessageType::kShutdown;
  m.round = round;
  return m;
}

void ByteWriter::u16(std::uint16_t v) {
  u8(static_cast<std::uint8_t>(v));
  u8(static_cast<std::uint8_t>(v >> 8));
}

void ByteWriter::u32(std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) u8(static_cast<std::uint8_t>(v >> s));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int s = 0; s < 64; s += 8) u8(static_cast<std::uint8_t>(v >> s));
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void ByteWriter::bundle(const WeightBundle& bundle) {
  require(bundle.size() <= std::numeric_limits<std::uint16_t>::max(), ErrorCode::kInvalidArgument,
          "bundle has too many entries for the wire format");
  u16(static_cast<std::uint16_t>(bundle.size()));
  for (const auto& entry : bundle.entries()) {
    require(entry.name.size() <= std::numeric_limits<std::uint16_t>::max(), ErrorCode::kInvalidArgument,
            "entry name too long");
    u16(static_cast<std::uint16_t>(entry.name.size()));
    raw(std::span(reinterpret_cast<const std::uint8_t*>(entry.name.data()), entry.name.size()));
    const auto& shape = entry.tensor.shape();
    u8(static_cast<std::uint8_t>(shape.size()));
    for (std::size_t d : shape) u32(static_cast<std::uint32_t>(d));
    const auto values = entry.tensor.values();
    const std::size_t offset = bytes_.size();
    bytes_.resize(offset + values.size() * sizeof(float));
    std::memcpy(bytes_.data() + offset, values.data(), values.size() * sizeof(float));
  }
}

std::span<const std::uint8_t> ByteReader::raw(std::size_t n) {
  if (n > remaining()) {
    fail(ErrorCode::kTruncated, "payload truncated at byte " + std::to_string(pos_) + ": need " +
                                    std::to_string(n) + ", have " + std::to_string(remaining()));
  }
  auto out = data_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::uint8_t ByteReader::u8() { return raw(1)[0]; }

std::uint16_t ByteReader::u16() {
  auto b = raw(2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t ByteReader::u32() {
  auto b = raw(4);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

std::uint64_t ByteReader::u64() {
  auto b = raw(8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

WeightBundle ByteReader::bundle(ModelKind kind) {
  WeightBundle out(kind);
  const std::uint16_t count = u16();
  for (std::uint16_t e = 0; e < count; ++e) {
    const std::uint16_t name_len = u16();
    auto name_bytes = raw(name_len);
    std::string name(reinterpret_cast<const char*>(name_bytes.data()), name_bytes.size());
    const std::uint8_t rank = u8();
    if (rank < 1 || rank > 3) fail(ErrorCode::kMalformed, "entry '" + name + "' has unsupported rank");
    Shape shape(rank);
    std::uint64_t count_values = 1;
    for (auto& d : shape) {
      d = u32();
      if (d == 0) fail(ErrorCode::kMalformed, "entry '" + name + "' has a zero dimension");
      if (d > remaining() / sizeof(float) / count_values) {
        fail(ErrorCode::kTruncated, "entry '" + name + "' declares more values than the payload holds");
      }
      count_values *= d;
    }
    auto value_bytes = raw(static_cast<std::size_t>(count_values) * sizeof(float));
    std::vector<float> values(static_cast<std::size_t>(count_values));
    std::memcpy(values.data(), value_bytes.data(), value_bytes.size());
    if (out.find(name) != nullptr) fail(ErrorCode::kMalformed, "duplicate entry '" + name + "'");
    out.add(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  return out;
}

std::vector<std::uint8_t> encode_message(const Message& msg) {
  ByteWriter w;
  w.raw(kMagic);
  w.u8(kVersion);
  w.u8(static_cast<std::uint8_t>(msg.type));
  w.u8(static_cast<std::uint8_t>(msg.tier));
  w.u32(msg.round);
  switch (msg.type) {
    case MessageType::kRegister:
      w.u32(msg.client_id);
      break;
    case MessageType::kModel:
      w.bundle(msg.bundle);
      break;
    case MessageType::kUpdate:
      w.u64(msg.n_samples);
      w.bundle(msg.bundle);
      break;
    case MessageType::kAck:
    case MessageType::kShutdown:
      break;
  }
  return w.take();
}

Message decode_message(std::span<const std::uint8_t> payload) {
  if (payload.size() < kHeaderSize) {
    fail(ErrorCode::kTruncated, "payload of " + std::to_string(payload.size()) + " bytes is shorter than the header");
  }
  ByteReader r(payload);
  auto magic = r.raw(kMagic.size());
  if (!std::equal(magic.begin(), magic.end(), kMagic.begin())) fail(ErrorCode::kBadMagic, "bad magic");
  const std::uint8_t version = r.u8();
  if (version != kVersion) {
    fail(ErrorCode::kUnsupportedVersion, "unsupported protocol version " + std::to_string(version));
  }
  const std::uint8_t type = r.u8();
  if (type > static_cast<std::uint8_t>(MessageType::kShutdown)) {
    fail(ErrorCode::kUnknownMessageType, "unknown message type " + std::to_string(type));
  }
  const std::uint8_t tier = r.u8();
  if (tier > static_cast<std::uint8_t>(ModelKind::kClassifier)) {
    fail(ErrorCode::kMalformed, "unknown tier " + std::to_string(tier));
  }
  Message msg;
  msg.type = static_cast<MessageType>(type);
  msg.tier = static_cast<ModelKind>(tier);
  msg.round = r.u32();
  msg.bundle.set_kind(msg.tier);
  switch (msg.type) {
    case MessageType::kRegister:
      msg.client_id = r.u32();
      break;
    case MessageType::kModel:
      msg.bundle = r.bundle(msg.tier);
      break;
    case MessageType::kUpdate:
      msg.n_samples = r.u64();
      msg.bundle = r.bundle(msg.tier);
      break;
    case MessageType::kAck:
    case MessageType::kShutdown:
      break;
  }
  if (r.remaining() != 0) {
    fail(ErrorCode::kMalformed, std::to_string(r.remaining()) + " trailing bytes after " +
                                    std::string(to_string(msg.type)) + " message");
  }
  return msg;
}

std::vector<std::uint8_t> frame(std::span<const std::uint8_t> payload) {
  require(payload.size() <= std::numeric_limits<std::uint32_t>::max(), ErrorCode::kInvalidArgument,
          "payload too large to frame");
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(payload.size()));
  w.raw(payload);
  return w.take();
}

std::optional<std::vector<std::uint8_t>> take_frame(std::vector<std::uint8_t>& buffer) {
  if (buffer.size() < kFramePrefixSize) return std::nullopt;
  ByteReader r(buffer);
  const std::uint32_t length = r.u32();
  if (buffer.size() < kFramePrefixSize + length) return std::nullopt;
  std::vector<std::uint8_t> payload(buffer.begin() + kFramePrefixSize,
                                    buffer.begin() + static_cast<std::ptrdiff_t>(kFramePrefixSize + length));
  buffer.erase(buffer.begin(), buffer.begin() + static_cast<std::ptrdiff_t>(kFramePrefixSize + length));
  return payload;
}

}  // namespace fedecg::wire
