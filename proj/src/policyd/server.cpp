#include "vilas/policyd/server.hpp"

#include <sys/socket.h>

#include <algorithm>
#include <list>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

#include "vilas/error.hpp"

namespace vilas::policyd {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using nlohmann::json;
using tcp = asio::ip::tcp;
using transport::Envelope;

namespace {
constexpr std::uint64_t kWsSessionBase = std::uint64_t{1} << 40;
}

void LatencyProfile::validate() const {
  if (!(mean_ms >= 0) || !(std_ms >= 0)) {
    throw Error(Errc::invalid_argument, "latency mean and std must be non-negative");
  }
}

/// Blocking WebSocket server with one thread per connection.
class PolicyServer::WsServer {
 public:
  WsServer(PolicyServer& owner, const transport::Address& bind) : owner_(owner), acceptor_(ioc_) {
    tcp::endpoint ep(asio::ip::make_address(bind.host), bind.port);
    acceptor_.open(ep.protocol());
    acceptor_.set_option(asio::socket_base::reuse_address(true));
    acceptor_.bind(ep);
    acceptor_.listen();
    port_ = acceptor_.local_endpoint().port();
    accept_thread_ = std::thread([this] { accept_loop(); });
  }

  ~WsServer() { stop(); }

  std::uint16_t port() const { return port_; }

  void stop() {
    if (stopping_.exchange(true)) return;
    ::shutdown(acceptor_.native_handle(), SHUT_RDWR);
    beast::error_code ec;
    acceptor_.close(ec);
    if (accept_thread_.joinable()) accept_thread_.join();
    std::list<std::unique_ptr<Conn>> conns;
    {
      std::lock_guard lk(mu_);
      for (auto& c : conns_) ::shutdown(c->fd, SHUT_RDWR);
      conns.swap(conns_);
    }
    for (auto& c : conns) c->thread.join();
  }

 private:
  struct Conn {
    int fd = -1;
    std::thread thread;
    std::atomic<bool> done{false};
  };

  void accept_loop() {
    while (!stopping_) {
      tcp::socket sock(ioc_);
      beast::error_code ec;
      acceptor_.accept(sock, ec);
      if (ec) {
        if (stopping_) return;
        continue;
      }
      sock.set_option(tcp::no_delay(true), ec);
      std::lock_guard lk(mu_);
      reap_locked();
      auto conn = std::make_unique<Conn>();
      conn->fd = sock.native_handle();
      const std::uint64_t session = kWsSessionBase + next_session_++;
      Conn* raw = conn.get();
      conn->thread = std::thread([this, raw, session, s = std::move(sock)]() mutable {
        serve(std::move(s), session);
        raw->done = true;
      });
      conns_.push_back(std::move(conn));
    }
  }

  void reap_locked() {
    for (auto it = conns_.begin(); it != conns_.end();) {
      if ((*it)->done) {
        (*it)->thread.join();
        it = conns_.erase(it);
      } else {
        ++it;
      }
    }
  }

  void serve(tcp::socket sock, std::uint64_t session) {
    try {
      websocket::stream<tcp::socket> ws(std::move(sock));
      ws.read_message_max(64u * 1024u * 1024u);
      ws.accept();
      ws.binary(true);
      for (;;) {
        beast::flat_buffer buf;
        ws.read(buf);
        const Micros received = owner_.clock_.now();
        const std::string text = beast::buffers_to_string(buf.data());
        Envelope reply;
        try {
          reply = owner_.handle(transport::parse_envelope(text), session, received);
        } catch (const Error& e) {
          reply = transport::error_reply("bad-request", e.what());
        }
        ws.write(asio::buffer(transport::serialize(reply)));
      }
    } catch (const std::exception& e) {
      spdlog::debug("policyd ws session {} ended: {}", session, e.what());
    }
    owner_.close_session(session);
  }

  PolicyServer& owner_;
  asio::io_context ioc_;
  tcp::acceptor acceptor_;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread accept_thread_;
  std::mutex mu_;
  std::list<std::unique_ptr<Conn>> conns_;
  std::uint64_t next_session_ = 0;
};

PolicyServer::PolicyServer(Clock& clock, ServerOptions options) : clock_(clock), options_(std::move(options)) {
  options_.latency.validate();
  ctx_.horizon = options_.horizon;
  ctx_.control_rate_hz = options_.control_rate_hz;
  ctx_.config = options_.config;
  ctx_.world = options_.world;
  // Fail early on bad specs (missing episode, oracle without world access).
  make_policy(options_.spec, ctx_, options_.seed);
  if (!options_.latency_log.empty()) {
    latency_log_.open(options_.latency_log, std::ios::app);
    if (!latency_log_) throw Error(Errc::io, "cannot open latency log " + options_.latency_log);
  }
  if (options_.mq_bind) {
    mq_ = std::make_unique<transport::Server>(
        *options_.mq_bind,
        [this](const Envelope& req, const transport::RequestContext& ctx) {
          return handle(req, ctx.session, clock_.now());
        },
        "policyd-mq");
    mq_->on_session_closed([this](std::uint64_t s) { close_session(s); });
  }
  if (options_.ws_bind) ws_ = std::make_unique<WsServer>(*this, *options_.ws_bind);
}

PolicyServer::~PolicyServer() { stop(); }

void PolicyServer::stop() {
  if (mq_) mq_->stop();
  if (ws_) ws_->stop();
}

std::optional<transport::Address> PolicyServer::mq_address() const {
  if (!mq_) return std::nullopt;
  return transport::Address{options_.mq_bind->host == "0.0.0.0" ? "127.0.0.1" : options_.mq_bind->host, mq_->port()};
}

std::optional<transport::Address> PolicyServer::ws_address() const {
  if (!ws_) return std::nullopt;
  return transport::Address{options_.ws_bind->host == "0.0.0.0" ? "127.0.0.1" : options_.ws_bind->host, ws_->port()};
}

std::vector<double> PolicyServer::injected_ms() const {
  std::lock_guard lk(mu_);
  return injected_;
}

PolicyServer::Session& PolicyServer::session(std::uint64_t id) {
  std::lock_guard lk(mu_);
  auto& s = sessions_[id];
  if (!s) {
    s = std::make_unique<Session>();
    s->policy = make_policy(options_.spec, ctx_, options_.seed);
    s->latency_rng.seed(options_.latency.seed);
  }
  return *s;
}

void PolicyServer::close_session(std::uint64_t id) {
  std::lock_guard lk(mu_);
  sessions_.erase(id);
}

double PolicyServer::sample_latency(Session& s) {
  const auto& p = options_.latency;
  if (p.std_ms == 0) return p.mean_ms;
  std::normal_distribution<double> n(p.mean_ms, p.std_ms);
  return std::max(0.0, n(s.latency_rng));
}

Envelope PolicyServer::handle(const Envelope& req, std::uint64_t id, Micros received) {
  if (req.t == "ping") return {"pong", req.id};
  if (req.t == "policy.info") {
    return {"policy.info", req.id, {{"kind", options_.spec.str()}, {"horizon", options_.horizon}}};
  }
  Session& s = session(id);
  std::lock_guard lk(s.mu);
  if (req.t == "policy.reset") {
    const auto seed = req.body.value("seed", options_.seed);
    s.policy = make_policy(options_.spec, ctx_, seed);
    s.seq = 0;
    return {"policy.ack", req.id, {{"seed", seed}}};
  }
  if (req.t != "infer") {
    Envelope e = transport::error_reply("unknown-type", "unknown message type '" + req.t + "'");
    e.id = req.id;
    return e;
  }

  const double latency = sample_latency(s);
  broker::ActionChunk chunk;
  try {
    const auto it = req.body.find("observation");
    if (it == req.body.end()) throw Error(Errc::protocol, "infer request without observation");
    const auto obs = broker::observation_from_json(*it);
    chunk.actions = s.policy->act(obs);
  } catch (const Error& e) {
    Envelope err = transport::error_reply(e.code() == Errc::protocol ? "bad-observation" : "policy-error", e.what());
    err.id = req.id;
    return err;
  }
  chunk.horizon = options_.horizon;
  chunk.seq = ++s.seq;
  {
    std::lock_guard g(mu_);
    injected_.push_back(latency);
    if (latency_log_.is_open()) {
      latency_log_ << json{{"session", id}, {"seq", chunk.seq}, {"latency_ms", latency}}.dump() << "\n";
      latency_log_.flush();
    }
  }
  ++served_;
  clock_.sleep_until(received + Micros(static_cast<std::int64_t>(std::llround(latency * 1000.0))));
  return broker::chunk_reply(chunk, req.id);
}

}  // namespace vilas::policyd
