#include "vilas/transport/socket.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>

#include "vilas/error.hpp"

namespace vilas::transport {

namespace {

[[noreturn]] void throw_errno(Errc code, const std::string& what) {
  throw Error(code, what + ": " + std::strerror(errno));
}

int poll_ms(Micros timeout) {
  if (timeout.count() <= 0) return 0;
  return static_cast<int>((timeout.count() + 999) / 1000);
}

// Waits for the requested event; false on timeout.
bool wait_fd(int fd, short events, Micros timeout) {
  pollfd pfd{fd, events, 0};
  for (;;) {
    const int rc = ::poll(&pfd, 1, poll_ms(timeout));
    if (rc > 0) return true;
    if (rc == 0) return false;
    if (errno != EINTR) throw_errno(Errc::connection, "poll");
  }
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

}  // namespace

Address Address::parse(std::string_view text) {
  Address a;
  if (auto pos = text.find("://"); pos != std::string_view::npos) text.remove_prefix(pos + 3);
  if (auto slash = text.find('/'); slash != std::string_view::npos) text = text.substr(0, slash);
  std::string_view port_text = text;
  if (auto colon = text.rfind(':'); colon != std::string_view::npos) {
    if (colon > 0) a.host = std::string(text.substr(0, colon));
    port_text = text.substr(colon + 1);
  }
  if (a.host == "*" || a.host == "0.0.0.0") a.host = "0.0.0.0";
  char* end = nullptr;
  const std::string p(port_text);
  const long port = std::strtol(p.c_str(), &end, 10);
  if (p.empty() || *end != '\0' || port < 0 || port > 65535) {
    throw Error(Errc::invalid_argument, "bad address '" + std::string(text) + "'");
  }
  a.port = static_cast<std::uint16_t>(port);
  return a;
}

Address address_from_env(const char* var, const Address& fallback) {
  if (const char* v = std::getenv(var); v && *v) return Address::parse(v);
  return fallback;
}

Socket& Socket::operator=(Socket&& o) noexcept {
  if (this != &o) {
    close();
    fd_ = o.fd_;
    o.fd_ = -1;
  }
  return *this;
}

void Socket::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

void Socket::shutdown() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void Socket::send_all(std::string_view bytes, Micros timeout) {
  if (fd_ < 0) throw Error(Errc::connection, "send on closed socket");
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL | MSG_DONTWAIT);
    if (n > 0) {
      sent += static_cast<std::size_t>(n);
      continue;
    }
    if (n < 0 && errno == EINTR) continue;
    if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) {
      if (!wait_fd(fd_, POLLOUT, timeout)) throw Error(Errc::timeout, "send timed out");
      continue;
    }
    throw_errno(Errc::connection, "send");
  }
}

std::size_t Socket::recv_some(char* buf, std::size_t cap, Micros timeout) {
  if (fd_ < 0) throw Error(Errc::connection, "recv on closed socket");
  if (!wait_fd(fd_, POLLIN, timeout)) throw Error(Errc::timeout, "receive timed out");
  for (;;) {
    const ssize_t n = ::recv(fd_, buf, cap, 0);
    if (n >= 0) return static_cast<std::size_t>(n);
    if (errno == EINTR) continue;
    if (errno == ECONNRESET) return 0;
    throw_errno(Errc::connection, "recv");
  }
}

Socket connect_tcp(const Address& addr, Micros timeout) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(addr.port);
  if (int rc = ::getaddrinfo(addr.host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    throw Error(Errc::connection, "resolve " + addr.str() + ": " + ::gai_strerror(rc));
  }
  Socket sock(::socket(res->ai_family, res->ai_socktype | SOCK_CLOEXEC, res->ai_protocol));
  if (!sock.valid()) {
    ::freeaddrinfo(res);
    throw_errno(Errc::connection, "socket");
  }
  const int flags = ::fcntl(sock.fd(), F_GETFL, 0);
  ::fcntl(sock.fd(), F_SETFL, flags | O_NONBLOCK);
  int rc = ::connect(sock.fd(), res->ai_addr, res->ai_addrlen);
  ::freeaddrinfo(res);
  if (rc < 0 && errno != EINPROGRESS) throw_errno(Errc::connection, "connect " + addr.str());
  if (rc < 0) {
    if (!wait_fd(sock.fd(), POLLOUT, timeout)) throw Error(Errc::timeout, "connect " + addr.str() + " timed out");
    int err = 0;
    socklen_t len = sizeof err;
    ::getsockopt(sock.fd(), SOL_SOCKET, SO_ERROR, &err, &len);
    if (err != 0) {
      errno = err;
      throw_errno(Errc::connection, "connect " + addr.str());
    }
  }
  ::fcntl(sock.fd(), F_SETFL, flags);
  set_nodelay(sock.fd());
  return sock;
}

Listener::Listener(const Address& bind) {
  sock_ = Socket(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!sock_.valid()) throw_errno(Errc::connection, "socket");
  int one = 1;
  ::setsockopt(sock_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(bind.port);
  if (::inet_pton(AF_INET, bind.host == "localhost" ? "127.0.0.1" : bind.host.c_str(), &sa.sin_addr) != 1) {
    throw Error(Errc::invalid_argument, "bad bind host '" + bind.host + "'");
  }
  if (::bind(sock_.fd(), reinterpret_cast<sockaddr*>(&sa), sizeof sa) < 0) {
    throw_errno(Errc::connection, "bind " + bind.str());
  }
  if (::listen(sock_.fd(), 64) < 0) throw_errno(Errc::connection, "listen");
  socklen_t len = sizeof sa;
  ::getsockname(sock_.fd(), reinterpret_cast<sockaddr*>(&sa), &len);
  port_ = ntohs(sa.sin_port);
}

std::optional<Socket> Listener::accept(Micros timeout) {
  if (!wait_fd(sock_.fd(), POLLIN, timeout)) return std::nullopt;
  const int fd = ::accept4(sock_.fd(), nullptr, nullptr, SOCK_CLOEXEC);
  if (fd < 0) {
    if (errno == EINTR || errno == EAGAIN || errno == ECONNABORTED) return std::nullopt;
    throw_errno(Errc::connection, "accept");
  }
  set_nodelay(fd);
  return Socket(fd);
}

}  // namespace vilas::transport
