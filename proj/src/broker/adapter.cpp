#include "vilas/broker/adapter.hpp"

#include <chrono>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "vilas/error.hpp"

namespace vilas::broker {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

Protocol parse_protocol(const std::string& s) {
  if (s == "ws") return Protocol::ws;
  if (s == "mq") return Protocol::mq;
  throw Error(Errc::invalid_argument, "unknown protocol '" + s + "' (ws|mq)");
}

std::string_view protocol_name(Protocol p) { return p == Protocol::ws ? "ws" : "mq"; }

transport::Envelope PolicyAdapter::exchange(transport::Envelope req, Micros timeout) {
  req.id = ++next_id_;
  last_payload_ = transport::serialize(req);
  std::string reply_text;
  try {
    reply_text = roundtrip(last_payload_, timeout);
  } catch (const Error& e) {
    close();
    if (e.code() == Errc::timeout) throw;
    throw Error(Errc::adapter, std::string(protocol_name(protocol())) + " adapter: " + e.what());
  }
  transport::Envelope reply;
  try {
    reply = transport::parse_envelope(reply_text);
  } catch (const Error& e) {
    close();
    throw Error(Errc::adapter, std::string(protocol_name(protocol())) + " adapter: " + e.what());
  }
  if (reply.id != req.id) {
    close();
    throw Error(Errc::adapter, "reply id " + std::to_string(reply.id) + " does not match request " +
                                   std::to_string(req.id));
  }
  return reply;
}

ActionChunk PolicyAdapter::infer(const Observation& obs, int horizon, Micros timeout) {
  return parse_chunk(exchange(infer_request(obs, 0), timeout), horizon);
}

void PolicyAdapter::reset(std::uint64_t seed, Micros timeout) {
  const auto reply = exchange({"policy.reset", 0, {{"seed", seed}}}, timeout);
  if (reply.t == "error") {
    throw transport::RemoteError(reply.body.value("code", "error"), reply.body.value("message", ""));
  }
}

// mq

MqAdapter::MqAdapter(transport::Address addr, Micros connect_timeout)
    : addr_(std::move(addr)), connect_timeout_(connect_timeout) {}

MqAdapter::~MqAdapter() = default;

void MqAdapter::close() {
  sock_.close();
  decoder_ = transport::FrameDecoder{};
}

std::string MqAdapter::roundtrip(const std::string& payload, Micros timeout) {
  if (!sock_.valid()) {
    sock_ = transport::connect_tcp(addr_, connect_timeout_);
    decoder_ = transport::FrameDecoder{};
  }
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  sock_.send_all(transport::encode_frame(payload), timeout);
  std::string buf(64 * 1024, '\0');
  for (;;) {
    if (auto p = decoder_.next_payload()) return *p;
    const auto left = std::chrono::duration_cast<Micros>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw Error(Errc::timeout, "policy request to " + addr_.str() + " timed out");
    const std::size_t n = sock_.recv_some(buf.data(), buf.size(), left);
    if (n == 0) throw Error(Errc::connection, "policy server " + addr_.str() + " closed the connection");
    decoder_.feed(std::string_view(buf.data(), n));
  }
}

// ws

struct WsAdapter::Impl {
  transport::Address addr;
  std::string target;
  Micros connect_timeout;
  asio::io_context ioc;
  std::unique_ptr<websocket::stream<beast::tcp_stream>> ws;

  // Runs the io context until `done` or the deadline; on expiry the stream
  // is torn down and timeout is thrown.
  void run_until(bool& done, Micros timeout, const char* what) {
    ioc.restart();
    ioc.run_for(std::chrono::microseconds(timeout.count()));
    if (!done) {
      ws.reset();
      ioc.restart();
      ioc.poll();
      throw Error(Errc::timeout, std::string("ws ") + what + " to " + addr.str() + " timed out");
    }
  }

  void connect() {
    ws = std::make_unique<websocket::stream<beast::tcp_stream>>(ioc);
    tcp::resolver resolver(ioc);
    beast::error_code ec;
    const auto results = resolver.resolve(addr.host, std::to_string(addr.port), ec);
    if (ec) throw Error(Errc::connection, "resolve " + addr.str() + ": " + ec.message());
    bool done = false;
    beast::get_lowest_layer(*ws).async_connect(results, [&](beast::error_code e, const tcp::endpoint&) {
      ec = e;
      done = true;
    });
    run_until(done, connect_timeout, "connect");
    if (ec) {
      ws.reset();
      throw Error(Errc::connection, "connect " + addr.str() + ": " + ec.message());
    }
    beast::get_lowest_layer(*ws).socket().set_option(tcp::no_delay(true), ec);
    done = false;
    ws->async_handshake(addr.host, target, [&](beast::error_code e) {
      ec = e;
      done = true;
    });
    run_until(done, connect_timeout, "handshake");
    if (ec) {
      ws.reset();
      throw Error(Errc::connection, "websocket handshake with " + addr.str() + " failed: " + ec.message());
    }
    ws->binary(true);
    ws->read_message_max(64u * 1024u * 1024u);
  }
};

WsAdapter::WsAdapter(transport::Address addr, std::string target, Micros connect_timeout)
    : impl_(std::make_unique<Impl>()) {
  impl_->addr = std::move(addr);
  impl_->target = std::move(target);
  impl_->connect_timeout = connect_timeout;
}

WsAdapter::~WsAdapter() = default;

void WsAdapter::close() { impl_->ws.reset(); }

std::string WsAdapter::roundtrip(const std::string& payload, Micros timeout) {
  if (!impl_->ws) impl_->connect();
  beast::error_code ec;
  bool done = false;
  impl_->ws->async_write(asio::buffer(payload), [&](beast::error_code e, std::size_t) {
    ec = e;
    done = true;
  });
  impl_->run_until(done, timeout, "send");
  if (ec) throw Error(Errc::connection, "ws send failed: " + ec.message());
  beast::flat_buffer buf;
  done = false;
  impl_->ws->async_read(buf, [&](beast::error_code e, std::size_t) {
    ec = e;
    done = true;
  });
  impl_->run_until(done, timeout, "reply");
  if (ec) throw Error(Errc::connection, "ws receive failed: " + ec.message());
  return beast::buffers_to_string(buf.data());
}

std::unique_ptr<PolicyAdapter> make_adapter(Protocol p, const transport::Address& addr) {
  if (p == Protocol::ws) return std::make_unique<WsAdapter>(addr);
  return std::make_unique<MqAdapter>(addr);
}

}  // namespace vilas::broker
