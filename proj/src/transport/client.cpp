#include "vilas/transport/client.hpp"

#include <chrono>

namespace vilas::transport {

Client::Client(Address addr, Micros connect_timeout)
    : addr_(std::move(addr)), connect_timeout_(connect_timeout) {}

void Client::close() {
  sock_.close();
  decoder_ = FrameDecoder{};
}

void Client::ensure_connected() {
  if (sock_.valid()) return;
  sock_ = connect_tcp(addr_, connect_timeout_);
  decoder_ = FrameDecoder{};
}

Envelope Client::request(Envelope req, Micros timeout) {
  ensure_connected();
  req.id = ++next_id_;
  last_payload_ = serialize(req);
  try {
    sock_.send_all(encode_frame(last_payload_), timeout);
    std::string buf(64 * 1024, '\0');
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      if (auto reply = decoder_.next()) {
        if (reply->id != req.id) {
          throw Error(Errc::protocol, "reply id " + std::to_string(reply->id) + " does not match request id " +
                                          std::to_string(req.id));
        }
        return *reply;
      }
      const auto left = std::chrono::duration_cast<Micros>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw Error(Errc::timeout, "request to " + addr_.str() + " timed out");
      const std::size_t n = sock_.recv_some(buf.data(), buf.size(), left);
      if (n == 0) throw Error(Errc::connection, "connection to " + addr_.str() + " closed by peer");
      decoder_.feed(std::string_view(buf.data(), n));
    }
  } catch (...) {
    close();
    throw;
  }
}

Envelope Client::call(std::string type, nlohmann::json body, Micros timeout) {
  Envelope reply = request({std::move(type), 0, std::move(body)}, timeout);
  if (reply.t == "error") {
    throw RemoteError(reply.body.value("code", "error"), reply.body.value("message", ""));
  }
  return reply;
}

}  // namespace vilas::transport
