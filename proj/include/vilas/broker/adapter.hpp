#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "vilas/broker/protocol.hpp"
#include "vilas/transport/client.hpp"

namespace vilas::broker {

enum class Protocol { ws, mq };
Protocol parse_protocol(const std::string& s);
std::string_view protocol_name(Protocol p);

/// Client side of one policy-server protocol. Both adapters number requests
/// 1, 2, 3, ... and send byte-identical documents; only the framing
/// differs. Transport failures throw adapter, expired deadlines timeout.
class PolicyAdapter {
 public:
  virtual ~PolicyAdapter() = default;

  ActionChunk infer(const Observation& obs, int horizon, Micros timeout);
  /// policy.reset: restarts the server-side policy state for this session.
  void reset(std::uint64_t seed, Micros timeout);

  /// One request/reply exchange. Assigns the envelope id.
  transport::Envelope exchange(transport::Envelope req, Micros timeout);

  /// Request document of the last exchange, as sent.
  const std::string& last_payload() const { return last_payload_; }
  virtual Protocol protocol() const = 0;
  virtual void close() = 0;

 protected:
  virtual std::string roundtrip(const std::string& payload, Micros timeout) = 0;

 private:
  std::uint64_t next_id_ = 0;
  std::string last_payload_;
};

/// Length-prefixed frames over TCP (the device transport).
class MqAdapter final : public PolicyAdapter {
 public:
  explicit MqAdapter(transport::Address addr, Micros connect_timeout = Micros(2'000'000));
  ~MqAdapter() override;
  Protocol protocol() const override { return Protocol::mq; }
  void close() override;

 protected:
  std::string roundtrip(const std::string& payload, Micros timeout) override;

 private:
  transport::Address addr_;
  Micros connect_timeout_;
  transport::Socket sock_;
  transport::FrameDecoder decoder_;
};

/// One binary WebSocket message per direction.
class WsAdapter final : public PolicyAdapter {
 public:
  explicit WsAdapter(transport::Address addr, std::string target = "/", Micros connect_timeout = Micros(2'000'000));
  ~WsAdapter() override;
  Protocol protocol() const override { return Protocol::ws; }
  void close() override;

 protected:
  std::string roundtrip(const std::string& payload, Micros timeout) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::unique_ptr<PolicyAdapter> make_adapter(Protocol p, const transport::Address& addr);

}  // namespace vilas::broker
