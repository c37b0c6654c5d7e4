#pragma once

#include <atomic>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vilas/broker/adapter.hpp"
#include "vilas/broker/protocol.hpp"
#include "vilas/clock.hpp"
#include "vilas/devices/client.hpp"

namespace vilas::broker {

struct DeployConfig {
  double control_rate_hz = 20.0;
  int horizon = 50;
  std::string prompt;
  Micros infer_timeout{5'000'000};
  int max_retries = 3;
  double grip_force = 50.0;
  std::optional<Micros> duration;
  std::string log_path;  // JSON lines; empty disables the file

  Micros period() const;
};

struct TickEvent {
  std::int64_t tick = 0;
  std::uint64_t seq = 0;
  int k = 0;
  Micros t{0};
  StateVector action{};
};

struct InferEvent {
  std::int64_t tick = 0;  // tick index the chunk will start at
  std::uint64_t seq = 0;
  Micros t_send{0};
  double latency_ms = 0;
  int attempt = 0;
  bool ok = false;
  std::string error;
};

struct DeployResult {
  std::int64_t ticks = 0;
  std::vector<InferEvent> inferences;  // successful and failed calls
  std::int64_t retries = 0;
  std::int64_t clamped_gripper = 0;
  bool aborted = false;
  std::string abort_reason;

  std::vector<double> latencies_ms() const;
  /// Send times of successful calls.
  std::vector<Micros> call_times() const;
};

/// Chunked deployment loop. Dispatches one cached action per control
/// period; when the chunk is exhausted it builds an observation and blocks
/// on the policy, holding the last commanded pose. The schedule re-anchors
/// at the reply, so call spacing is horizon / rate plus the call's latency.
class DeployLoop {
 public:
  DeployLoop(Clock& clock, devices::DeviceClient& devices, PolicyAdapter& policy, DeployConfig config);

  /// Called after every dispatched action; returning false ends the run.
  void on_tick(std::function<bool(const TickEvent&)> fn) { tick_hook_ = std::move(fn); }

  DeployResult run();
  void request_stop() { stop_ = true; }

 private:
  std::optional<ActionChunk> infer(std::int64_t tick, DeployResult& result);
  void log(const nlohmann::json& line);

  Clock& clock_;
  devices::DeviceClient& devices_;
  PolicyAdapter& policy_;
  DeployConfig config_;
  std::function<bool(const TickEvent&)> tick_hook_;
  std::atomic<bool> stop_{false};
  std::ofstream log_;
};

/// Reads the inference latencies (successful calls) from a run log.
std::vector<double> read_latencies(const std::string& runlog_path);

}  // namespace vilas::broker
