#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "vilas/clock.hpp"

namespace vilas::transport {

struct Address {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  /// Accepts "host:port", "tcp://host:port", "ws://host:port[/path]" or a
  /// bare port.
  static Address parse(std::string_view text);
  std::string str() const { return host + ":" + std::to_string(port); }
};

/// Resolves an address from an environment variable, falling back to the
/// given default.
Address address_from_env(const char* var, const Address& fallback);

/// Owning TCP socket (blocking fd, timeouts via poll).
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket() { close(); }
  Socket(Socket&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
  Socket& operator=(Socket&& o) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  bool valid() const { return fd_ >= 0; }
  int fd() const { return fd_; }

  void send_all(std::string_view bytes, Micros timeout);
  /// Returns 0 on orderly shutdown by the peer; throws timeout/connection.
  std::size_t recv_some(char* buf, std::size_t cap, Micros timeout);
  /// Wakes any thread blocked on this socket.
  void shutdown();
  void close();

 private:
  int fd_ = -1;
};

Socket connect_tcp(const Address& addr, Micros timeout);

class Listener {
 public:
  explicit Listener(const Address& bind);
  std::uint16_t port() const { return port_; }
  /// Empty on timeout.
  std::optional<Socket> accept(Micros timeout);
  /// Wakes a thread blocked in accept().
  void wake() { sock_.shutdown(); }

 private:
  Socket sock_;
  std::uint16_t port_ = 0;
};

}  // namespace vilas::transport
