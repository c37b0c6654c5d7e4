#pragma once

#include <atomic>
#include <functional>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>

#include "vilas/transport/frame.hpp"
#include "vilas/transport/socket.hpp"

namespace vilas::transport {

/// Thrown by handlers to produce {"t":"error","body":{"code":...}}.
class ReplyError : public std::runtime_error {
 public:
  ReplyError(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

Envelope error_reply(std::string_view code, std::string_view message);

/// Per-connection context handed to handlers; `session` is unique per
/// accepted connection and lets handlers keep per-session state.
struct RequestContext {
  std::uint64_t session = 0;
  std::string raw;  // request payload as received
};

using Handler = std::function<Envelope(const Envelope& request, const RequestContext& ctx)>;

/// Dispatches on the message type; unknown types get an error reply.
class Router {
 public:
  using Route = std::function<Envelope(const nlohmann::json& body, const RequestContext& ctx)>;

  Router& on(std::string type, Route route);
  Envelope operator()(const Envelope& request, const RequestContext& ctx) const;
  Handler handler() const;

 private:
  std::map<std::string, Route, std::less<>> routes_;
};

/// Length-prefixed request/reply server. Connections are served
/// concurrently; requests on one connection are handled serially.
class Server {
 public:
  Server(const Address& bind, Handler handler, std::string name = "server");
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  std::uint16_t port() const { return listener_.port(); }
  Address address() const { return {"127.0.0.1", port()}; }
  void stop();

  /// Called when a session closes (used to drop per-session state).
  void on_session_closed(std::function<void(std::uint64_t)> fn) { on_closed_ = std::move(fn); }

 private:
  struct Connection {
    Socket sock;
    std::thread thread;
    std::atomic<bool> done{false};
  };

  void accept_loop();
  void serve(Connection& conn, std::uint64_t session);
  void reap_locked();

  Listener listener_;
  Handler handler_;
  std::string name_;
  std::function<void(std::uint64_t)> on_closed_;
  std::atomic<bool> stopping_{false};
  std::mutex mu_;
  std::list<std::unique_ptr<Connection>> conns_;
  std::uint64_t next_session_ = 0;
  std::thread accept_thread_;
};

}  // namespace vilas::transport
