#include "fedecg/channel.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <thread>

#include "fedecg/error.hpp"

namespace fedecg {

std::size_t send_message(Channel& channel, const wire::Message& msg) {
  const auto payload = wire::encode_message(msg);
  channel.send(payload);
  return payload.size() + wire::kFramePrefixSize;
}

std::optional<wire::Message> receive_message(Channel& channel, std::size_t* wire_bytes) {
  auto payload = channel.receive();
  if (!payload) return std::nullopt;
  if (wire_bytes != nullptr) *wire_bytes = payload->size() + wire::kFramePrefixSize;
  return wire::decode_message(*payload);
}

namespace {

struct Pipe {
  std::mutex mutex;
  std::condition_variable ready;
  std::deque<std::vector<std::uint8_t>> queue;
  bool closed = false;
};

class MemoryChannel final : public Channel {
 public:
  MemoryChannel(std::shared_ptr<Pipe> inbound, std::shared_ptr<Pipe> outbound)
      : inbound_(std::move(inbound)), outbound_(std::move(outbound)) {}
  ~MemoryChannel() override { close(); }

  void send(std::span<const std::uint8_t> payload) override {
    std::lock_guard lock(outbound_->mutex);
    require(!outbound_->closed, ErrorCode::kProtocol, "send on a closed channel");
    outbound_->queue.emplace_back(payload.begin(), payload.end());
    outbound_->ready.notify_all();
  }

  std::optional<std::vector<std::uint8_t>> receive() override {
    std::unique_lock lock(inbound_->mutex);
    inbound_->ready.wait(lock, [&] { return !inbound_->queue.empty() || inbound_->closed; });
    if (inbound_->queue.empty()) return std::nullopt;
    auto payload = std::move(inbound_->queue.front());
    inbound_->queue.pop_front();
    return payload;
  }

  void close() override {
    for (auto* pipe : {inbound_.get(), outbound_.get()}) {
      std::lock_guard lock(pipe->mutex);
      pipe->closed = true;
      pipe->ready.notify_all();
    }
  }

 private:
  std::shared_ptr<Pipe> inbound_;
  std::shared_ptr<Pipe> outbound_;
};

}  // namespace

std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> make_memory_duplex() {
  auto a_to_b = std::make_shared<Pipe>();
  auto b_to_a = std::make_shared<Pipe>();
  return {std::make_unique<MemoryChannel>(b_to_a, a_to_b), std::make_unique<MemoryChannel>(a_to_b, b_to_a)};
}

TcpChannel::~TcpChannel() { close(); }

std::unique_ptr<TcpChannel> TcpChannel::connect(const std::string& host, std::uint16_t port, int timeout_ms) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (::getaddrinfo(host.c_str(), service.c_str(), &hints, &res) != 0 || res == nullptr) {
    fail(ErrorCode::kIo, "cannot resolve " + host);
  }
  std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(res, &::freeaddrinfo);
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
  while (true) {
    const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd < 0) fail(ErrorCode::kIo, std::string("socket: ") + std::strerror(errno));
    if (::connect(fd, res->ai_addr, res->ai_addrlen) == 0) {
      const int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      return std::make_unique<TcpChannel>(fd);
    }
    const int err = errno;
    ::close(fd);
    if (std::chrono::steady_clock::now() >= deadline) {
      fail(ErrorCode::kProtocol, "cannot connect to " + host + ":" + service + ": " + std::strerror(err));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
}

void TcpChannel::send(std::span<const std::uint8_t> payload) {
  require(fd_ >= 0, ErrorCode::kProtocol, "send on a closed channel");
  const auto bytes = wire::frame(payload);
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) fail(ErrorCode::kIo, std::string("send: ") + std::strerror(errno));
    sent += static_cast<std::size_t>(n);
  }
}

bool TcpChannel::read_exact(std::uint8_t* out, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t r = ::recv(fd_, out + got, n - got, 0);
    if (r < 0 && errno == EINTR) continue;
    if (r == 0) {
      if (got == 0) return false;
      fail(ErrorCode::kTruncated, "connection closed mid-frame");
    }
    if (r < 0) fail(ErrorCode::kIo, std::string("recv: ") + std::strerror(errno));
    got += static_cast<std::size_t>(r);
  }
  return true;
}

std::optional<std::vector<std::uint8_t>> TcpChannel::receive() {
  if (fd_ < 0) return std::nullopt;
  std::uint8_t prefix[wire::kFramePrefixSize];
  if (!read_exact(prefix, sizeof(prefix))) return std::nullopt;
  wire::ByteReader reader(prefix);
  const std::uint32_t length = reader.u32();
  require(length <= kMaxFrameBytes, ErrorCode::kProtocol, "frame of " + std::to_string(length) + " bytes exceeds limit");
  std::vector<std::uint8_t> payload(length);
  if (length > 0 && !read_exact(payload.data(), length)) fail(ErrorCode::kTruncated, "connection closed mid-frame");
  return payload;
}

void TcpChannel::interrupt() {
  std::lock_guard lock(fd_mutex_);
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void TcpChannel::close() {
  std::lock_guard lock(fd_mutex_);
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
}

TcpListener::TcpListener(std::uint16_t port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) fail(ErrorCode::kIo, std::string("socket: ") + std::strerror(errno));
  const int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_ANY);
  addr.sin_port = htons(port);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(fd_, 16) != 0) {
    const int err = errno;
    ::close(fd_);
    fail(ErrorCode::kIo, "cannot listen on port " + std::to_string(port) + ": " + std::strerror(err));
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<TcpChannel> TcpListener::accept(int timeout_ms) {
  pollfd pfd{fd_, POLLIN, 0};
  const int ready = ::poll(&pfd, 1, timeout_ms);
  if (ready <= 0) return nullptr;
  const int client = ::accept(fd_, nullptr, nullptr);
  if (client < 0) return nullptr;
  const int one = 1;
  ::setsockopt(client, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return std::make_unique<TcpChannel>(client);
}

std::pair<std::string, std::uint16_t> parse_endpoint(const std::string& endpoint) {
  const auto colon = endpoint.rfind(':');
  require(colon != std::string::npos && colon > 0 && colon + 1 < endpoint.size(), ErrorCode::kInvalidArgument,
          "endpoint '" + endpoint + "' is not host:port");
  const std::string port_text = endpoint.substr(colon + 1);
  int port = 0;
  try {
    std::size_t used = 0;
    port = std::stoi(port_text, &used);
    require(used == port_text.size(), ErrorCode::kInvalidArgument, "bad port");
  } catch (const std::logic_error&) {
    fail(ErrorCode::kInvalidArgument, "endpoint '" + endpoint + "' has a non-numeric port");
  }
  require(port > 0 && port < 65536, ErrorCode::kInvalidArgument, "port out of range in '" + endpoint + "'");
  return {endpoint.substr(0, colon), static_cast<std::uint16_t>(port)};
}

}  // namespace fedecg
