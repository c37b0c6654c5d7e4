#include "vilas/teleop/bridge.hpp"

#include <atomic>
#include <cmath>
#include <deque>
#include <mutex>
#include <set>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

#include "vilas/transport/frame.hpp"

namespace vilas::teleop {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using nlohmann::json;
using tcp = asio::ip::tcp;
using transport::Envelope;

namespace {


Envelope error_env(std::uint64_t id, const std::string& code, const std::string& message) {
  return {"error", id, {{"code", code}, {"message", message}}};
}

}  // namespace

struct Bridge::Impl {
  class Session;

  Impl(PushSource& src, BridgeHooks h, BridgeOptions opt)
      : source(src),
        hooks(std::move(h)),
        options(std::move(opt)),
        acceptor(ioc),
        state_timer(ioc),
        frame_timer(ioc),
        stop_timer(ioc) {
    tcp::endpoint ep(asio::ip::make_address(options.bind.host), options.bind.port);
    acceptor.open(ep.protocol());
    acceptor.set_option(asio::socket_base::reuse_address(true));
    acceptor.bind(ep);
    acceptor.listen();
    bound_port = acceptor.local_endpoint().port();
    do_accept();
    arm_state_timer();
    arm_frame_timer();
    thread = std::thread([this] {
      try {
        ioc.run();
      } catch (const std::exception& e) {
        spdlog::error("bridge: io loop failed: {}", e.what());
      }
    });
  }

  ~Impl() { shutdown(); }

  void shutdown();
  void do_accept();
  void arm_state_timer();
  void arm_frame_timer();
  void broadcast(const std::string& text);
  Envelope handle(Session& s, const Envelope& req);

  PushSource& source;
  BridgeHooks hooks;
  BridgeOptions options;
  asio::io_context ioc;
  tcp::acceptor acceptor;
  asio::steady_timer state_timer;
  asio::steady_timer frame_timer;
  asio::steady_timer stop_timer;
  std::uint16_t bound_port = 0;
  std::atomic<bool> stopped{false};
  std::thread thread;

  // Only touched on the io thread, except the counters.
  std::set<std::shared_ptr<Session>> live;
  Session* controller = nullptr;
  std::atomic<int> n_sessions{0};
  std::atomic<bool> has_controller{false};
};

class Bridge::Impl::Session : public std::enable_shared_from_this<Session> {
 public:
  Session(Impl& owner, tcp::socket sock) : owner_(owner), ws_(std::move(sock)) {}

  void start() {
    http::async_read(ws_.next_layer(), buffer_, req_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_request(ec); });
  }

  void send(std::string text) {
    if (closed_) return;
    queue_.push_back(std::move(text));
    if (queue_.size() == 1) write_next();
  }

  void close() {
    if (closed_) return;
    closing_ = true;
    ws_.async_close(websocket::close_code::going_away, [self = shared_from_this()](beast::error_code) {
      self->finish();
    });
  }

  bool observer() const { return observer_; }

 private:
  void on_request(beast::error_code ec) {
    if (ec || !websocket::is_upgrade(req_)) return finish();
    observer_ = std::string(req_.target()).find("observer") != std::string::npos;
    ws_.binary(false);
    ws_.async_accept(req_, [self = shared_from_this()](beast::error_code ec2) { self->on_accept(ec2); });
  }

  void on_accept(beast::error_code ec) {
    if (ec) return finish();
    owner_.live.insert(shared_from_this());
    ++owner_.n_sessions;
    registered_ = true;
    if (!observer_) {
      if (owner_.controller != nullptr) {
        send(transport::serialize(error_env(0, "busy", "another operator already controls this bridge")));
        close_after_flush_ = true;
        return;
      }
      owner_.controller = this;
      owner_.has_controller = true;
    }
    read_next();
  }

  void read_next() {
    ws_.async_read(in_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
  }

  void on_read(beast::error_code ec) {
    if (ec) return finish();
    const std::string text = beast::buffers_to_string(in_.data());
    in_.consume(in_.size());
    Envelope reply;
    try {
      reply = owner_.handle(*this, transport::parse_envelope(text));
    } catch (const Error& e) {
      reply = error_env(0, "bad-request", e.what());
    }
    if (!reply.t.empty()) send(transport::serialize(reply));
    read_next();
  }

  void write_next() {
    ws_.text(true);
    ws_.async_write(asio::buffer(queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->on_write(ec);
    });
  }

  void on_write(beast::error_code ec) {
    if (ec) return finish();
    queue_.pop_front();
    if (!queue_.empty()) return write_next();
    if (close_after_flush_ && !closing_) close();
  }

  void finish() {
    if (closed_) return;
    closed_ = true;
    queue_.clear();
    beast::error_code ignored;
    ws_.next_layer().shutdown(tcp::socket::shutdown_both, ignored);
    ws_.next_layer().close(ignored);
    if (owner_.controller == this) {
      owner_.controller = nullptr;
      owner_.has_controller = false;
    }
    if (registered_) {
      --owner_.n_sessions;
      owner_.live.erase(shared_from_this());
    }
  }

  Impl& owner_;
  websocket::stream<tcp::socket> ws_;
  beast::flat_buffer buffer_;
  beast::flat_buffer in_;
  http::request<http::string_body> req_;
  std::deque<std::string> queue_;
  bool observer_ = false;
  bool registered_ = false;
  bool closing_ = false;
  bool closed_ = false;
  bool close_after_flush_ = false;
};

void Bridge::Impl::shutdown() {
  if (stopped.exchange(true)) return;
  asio::post(ioc, [this] {
    beast::error_code ec;
    acceptor.close(ec);
    state_timer.cancel();
    frame_timer.cancel();
    for (auto& s : live) s->close();
    // Give sessions a moment to send their close frames.
    stop_timer.expires_after(std::chrono::milliseconds(200));
    stop_timer.async_wait([this](beast::error_code) { ioc.stop(); });
  });
  if (thread.joinable()) thread.join();
}

void Bridge::Impl::do_accept() {
  acceptor.async_accept([this](beast::error_code ec, tcp::socket sock) {
    if (ec) return;
    sock.set_option(tcp::no_delay(true), ec);
    std::make_shared<Session>(*this, std::move(sock))->start();
    if (!stopped) do_accept();
  });
}

void Bridge::Impl::broadcast(const std::string& text) {
  for (const auto& s : live) s->send(text);
}

void Bridge::Impl::arm_state_timer() {
  state_timer.expires_after(std::chrono::microseconds(options.state_period.count()));
  state_timer.async_wait([this](beast::error_code ec) {
    if (ec) return;
    if (hooks.view_state && !live.empty()) {
      try {
        broadcast(transport::serialize({"view.state", 0, hooks.view_state()}));
      } catch (const std::exception& e) {
        spdlog::debug("bridge: view.state unavailable: {}", e.what());
      }
    }
    arm_state_timer();
  });
}

void Bridge::Impl::arm_frame_timer() {
  frame_timer.expires_after(std::chrono::microseconds(options.frame_period.count()));
  frame_timer.async_wait([this](beast::error_code ec) {
    if (ec) return;
    if (hooks.view_frame && !live.empty()) {
      try {
        broadcast(transport::serialize({"view.frame", 0, hooks.view_frame()}));
      } catch (const std::exception& e) {
        spdlog::debug("bridge: view.frame unavailable: {}", e.what());
      }
    }
    arm_frame_timer();
  });
}

Envelope Bridge::Impl::handle(Session& s, const Envelope& req) {
  const auto& body = req.body;
  if (req.t == "ping") return {"pong", req.id};
  const bool control = req.t == "lead.set" || req.t == "lead.grip" || req.t == "rec.start" || req.t == "rec.stop";
  if (!control) return error_env(req.id, "unknown-type", "unknown message type '" + req.t + "'");
  if (s.observer()) return error_env(req.id, "read-only", "observer sessions cannot send " + req.t);

  if (req.t == "lead.set") {
    auto it = body.find("q");
    if (it == body.end() || !it->is_array() || it->size() != sim::kArmDof) {
      return error_env(req.id, "bad-arity", "lead.set needs q with exactly 6 joint angles");
    }
    sim::JointVector q{};
    for (int i = 0; i < sim::kArmDof; ++i) {
      if (!(*it)[i].is_number() || !std::isfinite((*it)[i].get<double>())) {
        return error_env(req.id, "non-finite", "lead.set joint values must be finite numbers");
      }
      q[i] = (*it)[i].get<double>();
    }
    source.set_arm(q);
    return {};
  }
  if (req.t == "lead.grip") {
    auto it = body.find("g");
    if (it == body.end() || !it->is_number()) return error_env(req.id, "bad-request", "lead.grip needs a number g");
    const double g = it->get<double>();
    if (!(g >= 0.0 && g <= 1.0)) return error_env(req.id, "g-out-of-range", "g must lie in [0, 1]");
    source.set_grip(g);
    return {};
  }
  if (req.t == "rec.start") {
    if (!hooks.rec_start) return error_env(req.id, "unavailable", "recording is not enabled on this bridge");
    try {
      return {"rec.status", req.id, hooks.rec_start(body.value("prompt", ""))};
    } catch (const std::exception& e) {
      return error_env(req.id, "rec-failed", e.what());
    }
  }
  if (!hooks.rec_stop) return error_env(req.id, "unavailable", "recording is not enabled on this bridge");
  try {
    return {"rec.status", req.id, hooks.rec_stop()};
  } catch (const std::exception& e) {
    return error_env(req.id, "rec-failed", e.what());
  }
}

Bridge::Bridge(PushSource& source, BridgeHooks hooks, BridgeOptions options)
    : impl_(std::make_unique<Impl>(source, std::move(hooks), std::move(options))) {}

Bridge::~Bridge() = default;

std::uint16_t Bridge::port() const { return impl_->bound_port; }
void Bridge::stop() { impl_->shutdown(); }
int Bridge::sessions() const { return impl_->n_sessions; }
bool Bridge::has_controller() const { return impl_->has_controller; }

}  // namespace vilas::teleop
