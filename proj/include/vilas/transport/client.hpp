#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "vilas/error.hpp"
#include "vilas/transport/frame.hpp"
#include "vilas/transport/socket.hpp"

namespace vilas::transport {

/// Error reply from the remote side; `remote_code()` carries its code.
class RemoteError : public Error {
 public:
  RemoteError(std::string code, const std::string& message)
      : Error(Errc::remote, code + ": " + message), remote_code_(std::move(code)) {}
  const std::string& remote_code() const { return remote_code_; }

 private:
  std::string remote_code_;
};

/// Request/reply client with strict alternation. Connects lazily; any
/// timeout or protocol violation drops the connection and the next request
/// reconnects.
class Client {
 public:
  explicit Client(Address addr, Micros connect_timeout = Micros(2'000'000));

  /// Assigns the next id, sends, and waits for the matching reply.
  Envelope request(Envelope req, Micros timeout);
  /// Like request() but turns error replies into RemoteError.
  Envelope call(std::string type, nlohmann::json body, Micros timeout);

  /// Serialized payload of the last request, exactly as sent.
  const std::string& last_payload() const { return last_payload_; }
  std::uint64_t last_id() const { return next_id_; }
  const Address& address() const { return addr_; }
  void close();

 private:
  void ensure_connected();

  Address addr_;
  Micros connect_timeout_;
  Socket sock_;
  FrameDecoder decoder_;
  std::uint64_t next_id_ = 0;
  std::string last_payload_;
};

}  // namespace vilas::transport
