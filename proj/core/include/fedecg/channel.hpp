#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedecg/protocol.hpp"

namespace fedecg {

/// Bidirectional stream of length-prefixed payloads.
class Channel {
 public:
  virtual ~Channel() = default;

  virtual void send(std::span<const std::uint8_t> payload) = 0;
  /// Next payload, or nullopt once the peer has closed.
  virtual std::optional<std::vector<std::uint8_t>> receive() = 0;
  virtual void close() = 0;
};

/// Encodes and sends; returns bytes on the wire including the frame prefix.
std::size_t send_message(Channel& channel, const wire::Message& msg);
/// Receives and decodes; nullopt when the peer closed. Bytes read go to `wire_bytes`.
std::optional<wire::Message> receive_message(Channel& channel, std::size_t* wire_bytes = nullptr);

/// Two connected in-memory endpoints.
std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> make_memory_duplex();

inline constexpr std::uint32_t kMaxFrameBytes = 1u << 30;

class TcpChannel final : public Channel {
 public:
  explicit TcpChannel(int fd) : fd_(fd) {}
  ~TcpChannel() override;
  TcpChannel(const TcpChannel&) = delete;
  TcpChannel& operator=(const TcpChannel&) = delete;

  /// Connects to host:port, retrying until `timeout_ms` elapses.
  static std::unique_ptr<TcpChannel> connect(const std::string& host, std::uint16_t port, int timeout_ms = 10000);

  void send(std::span<const std::uint8_t> payload) override;
  std::optional<std::vector<std::uint8_t>> receive() override;
  void close() override;
  /// Unblocks a receive running on another thread; the descriptor stays open until close().
  void interrupt();

 private:
  bool read_exact(std::uint8_t* out, std::size_t n);

  int fd_ = -1;
  std::mutex fd_mutex_;  // close() against interrupt() from another thread
};

class TcpListener {
 public:
  /// Binds 0.0.0.0:port; port 0 picks a free one.
  explicit TcpListener(std::uint16_t port);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const noexcept { return port_; }
  /// Waits up to `timeout_ms`; nullptr on timeout.
  std::unique_ptr<TcpChannel> accept(int timeout_ms);

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

/// Splits "host:port".
std::pair<std::string, std::uint16_t> parse_endpoint(const std::string& endpoint);

}  // namespace fedecg
