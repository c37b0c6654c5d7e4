#include "vilas/transport/server.hpp"

#include <spdlog/spdlog.h>

#include "vilas/error.hpp"

namespace vilas::transport {

namespace {
constexpr Micros kPollInterval{100'000};
constexpr Micros kSendTimeout{5'000'000};
}  // namespace

Envelope error_reply(std::string_view code, std::string_view message) {
  return {"error", 0, {{"code", code}, {"message", message}}};
}

Router& Router::on(std::string type, Route route) {
  routes_[std::move(type)] = std::move(route);
  return *this;
}

Envelope Router::operator()(const Envelope& request, const RequestContext& ctx) const {
  auto it = routes_.find(request.t);
  if (it == routes_.end()) return error_reply("unknown-type", "no handler for '" + request.t + "'");
  return it->second(request.body, ctx);
}

Handler Router::handler() const {
  return [router = *this](const Envelope& req, const RequestContext& ctx) { return router(req, ctx); };
}

Server::Server(const Address& bind, Handler handler, std::string name)
    : listener_(bind), handler_(std::move(handler)), name_(std::move(name)) {
  accept_thread_ = std::thread([this] { accept_loop(); });
}

Server::~Server() { stop(); }

void Server::stop() {
  if (stopping_.exchange(true)) return;
  listener_.wake();
  if (accept_thread_.joinable()) accept_thread_.join();
  std::list<std::unique_ptr<Connection>> conns;
  {
    std::lock_guard lk(mu_);
    conns.swap(conns_);
  }
  for (auto& c : conns) c->sock.shutdown();
  for (auto& c : conns) {
    if (c->thread.joinable()) c->thread.join();
  }
}

void Server::reap_locked() {
  for (auto it = conns_.begin(); it != conns_.end();) {
    if ((*it)->done) {
      if ((*it)->thread.joinable()) (*it)->thread.join();
      it = conns_.erase(it);
    } else {
      ++it;
    }
  }
}

void Server::accept_loop() {
  while (!stopping_) {
    std::optional<Socket> sock;
    try {
      sock = listener_.accept(kPollInterval);
    } catch (const Error& e) {
      if (stopping_) break;
      spdlog::warn("{}: accept failed: {}", name_, e.what());
      continue;
    }
    if (!sock) continue;
    std::lock_guard lk(mu_);
    reap_locked();
    if (stopping_) break;
    auto conn = std::make_unique<Connection>();
    conn->sock = std::move(*sock);
    Connection* raw = conn.get();
    const std::uint64_t session = ++next_session_;
    conns_.push_back(std::move(conn));
    raw->thread = std::thread([this, raw, session] {
      serve(*raw, session);
      raw->done = true;
    });
  }
}

void Server::serve(Connection& conn, std::uint64_t session) {
  FrameDecoder decoder;
  std::string buf(64 * 1024, '\0');
  RequestContext ctx{session, {}};
  try {
    while (!stopping_) {
      std::size_t n = 0;
      try {
        n = conn.sock.recv_some(buf.data(), buf.size(), kPollInterval);
      } catch (const Error& e) {
        if (e.code() == Errc::timeout) continue;
        throw;
      }
      if (n == 0) break;
      decoder.feed(std::string_view(buf.data(), n));
      while (auto payload = decoder.next_payload()) {
        const Envelope req = parse_envelope(*payload);
        ctx.raw = std::move(*payload);
        Envelope reply;
        try {
          reply = handler_(req, ctx);
        } catch (const ReplyError& e) {
          reply = error_reply(e.code(), e.what());
        } catch (const Error& e) {
          reply = error_reply(errc_name(e.code()), e.what());
        } catch (const std::exception& e) {
          reply = error_reply("internal", e.what());
        }
        reply.id = req.id;
        conn.sock.send_all(encode(reply), kSendTimeout);
      }
    }
  } catch (const Error& e) {
    // Protocol violations close the connection.
    spdlog::debug("{}: session {} closed: {}", name_, session, e.what());
  }
  conn.sock.shutdown();
  if (on_closed_) on_closed_(session);
}

}  // namespace vilas::transport
