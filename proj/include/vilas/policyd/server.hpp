#pragma once

#include <atomic>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "vilas/clock.hpp"
#include "vilas/policyd/policy.hpp"
#include "vilas/transport/server.hpp"

namespace vilas::policyd {

inline constexpr std::uint16_t kMqPort = 5603;
inline constexpr std::uint16_t kWsPort = 8000;

/// Gaussian latency clipped at zero.
struct LatencyProfile {
  double mean_ms = 0;
  double std_ms = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ServerOptions {
  PolicySpec spec;
  int horizon = 50;
  double control_rate_hz = 20.0;
  LatencyProfile latency;
  std::uint64_t seed = 0;  // policy seed until a policy.reset arrives
  std::optional<transport::Address> mq_bind = transport::Address{"127.0.0.1", kMqPort};
  std::optional<transport::Address> ws_bind = transport::Address{"127.0.0.1", kWsPort};
  sim::SimConfig config;
  WorldProvider world;          // required by the oracle
  std::string latency_log;      // JSON lines of injected samples, optional
};

/// Serves inference over the mq transport and/or WebSocket. Every session
/// (one client connection) owns its policy instance, latency generator and
/// sequence counter. The reply to a request received at time r is released
/// at r + latency sample, measured on the given clock.
class PolicyServer {
 public:
  PolicyServer(Clock& clock, ServerOptions options);
  ~PolicyServer();
  PolicyServer(const PolicyServer&) = delete;
  PolicyServer& operator=(const PolicyServer&) = delete;

  std::optional<transport::Address> mq_address() const;
  std::optional<transport::Address> ws_address() const;
  void stop();

  /// Every latency sample injected so far, in ms.
  std::vector<double> injected_ms() const;
  std::int64_t served() const { return served_; }

  /// Protocol-independent request handling (exposed for tests).
  transport::Envelope handle(const transport::Envelope& req, std::uint64_t session, Micros received);
  void close_session(std::uint64_t session);

 private:
  struct Session {
    std::unique_ptr<Policy> policy;
    std::mt19937_64 latency_rng;
    std::uint64_t seq = 0;
    std::mutex mu;
  };
  class WsServer;

  Session& session(std::uint64_t id);
  double sample_latency(Session& s);

  Clock& clock_;
  ServerOptions options_;
  PolicyContext ctx_;
  mutable std::mutex mu_;
  std::map<std::uint64_t, std::unique_ptr<Session>> sessions_;
  std::vector<double> injected_;
  std::ofstream latency_log_;
  std::atomic<std::int64_t> served_{0};
  std::unique_ptr<transport::Server> mq_;
  std::unique_ptr<WsServer> ws_;
};

}  // namespace vilas::policyd
