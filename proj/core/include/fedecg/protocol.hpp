#pragma once

// Wire format (little-endian throughout):
//   frame   := u32 payload_length, payload
//   payload := "FECG" u8 version u8 msg_type u8 tier u32 round, body
//   REGISTER body: u32 client_id
//   MODEL    body: bundle
//   UPDATE   body: u64 n_samples, bundle
//   ACK, SHUTDOWN: empty
//   bundle  := u16 entry_count, per entry { u16 name_len, name, u8 rank, rank x u32 dim, f32 values }

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedecg/bundle.hpp"

namespace fedecg::wire {

inline constexpr std::array<std::uint8_t, 4> kMagic = {'F', 'E', 'C', 'G'};
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::size_t kHeaderSize = 11;
inline constexpr std::size_t kFramePrefixSize = 4;

enum class MessageType : std::uint8_t {
  kRegister = 0,
  kModel = 1,
  kUpdate = 2,
  kAck = 3,
  kShutdown = 4,
};

std::string_view to_string(MessageType type);

struct Message {
  MessageType type = MessageType::kAck;
  ModelKind tier = ModelKind::kAutoencoder;
  std::uint32_t round = 0;
  std::uint32_t client_id = 0;  // REGISTER only
  std::uint64_t n_samples = 0;  // UPDATE only
  WeightBundle bundle;          // MODEL and UPDATE; its kind mirrors `tier`
};

bool operator==(const Message& a, const Message& b);

Message make_register(ModelKind tier, std::uint32_t round, std::uint32_t client_id);
Message make_model(ModelKind tier, std::uint32_t round, WeightBundle bundle);
Message make_update(ModelKind tier, std::uint32_t round, std::uint64_t n_samples, WeightBundle bundle);
Message make_ack(ModelKind tier, std::uint32_t round);
Message make_shutdown(std::uint32_t round);

std::vector<std::uint8_t> encode_message(const Message& msg);
Message decode_message(std::span<const std::uint8_t> payload);

/// Payload prefixed with its u32 length.
std::vector<std::uint8_t> frame(std::span<const std::uint8_t> payload);

/// Splits one frame off the front of `buffer`; nullopt if incomplete.
std::optional<std::vector<std::uint8_t>> take_frame(std::vector<std::uint8_t>& buffer);

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void raw(std::span<const std::uint8_t> data) { bytes_.insert(bytes_.end(), data.begin(), data.end()); }
  void bundle(const WeightBundle& bundle);

  std::vector<std::uint8_t>& bytes() noexcept { return bytes_; }
  std::vector<std::uint8_t> take() noexcept { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

/// Bounds-checked little-endian reader; every overrun throws kTruncated.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  std::span<const std::uint8_t> raw(std::size_t n);
  WeightBundle bundle(ModelKind kind);

  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  std::size_t position() const noexcept { return pos_; }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace fedecg::wire
