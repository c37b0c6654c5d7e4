#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vilas/broker/adapter.hpp"
#include "vilas/clock.hpp"
#include "vilas/eval/metrics.hpp"
#include "vilas/policyd/server.hpp"
#include "vilas/sim/world.hpp"

namespace vilas::eval {

struct EvalConfig {
  policyd::PolicySpec policy{"oracle", ""};
  int trials = 50;
  std::uint64_t base_seed = 7;
  broker::Protocol protocol = broker::Protocol::ws;
  int horizon = 50;
  double control_rate_hz = 20.0;
  policyd::LatencyProfile latency;
  int n_objects = 10;
  int attempts = 3;
  Micros attempt_timeout{30'000'000};
  bool accelerated = true;  // virtual clock; false runs in wall time
  int parallel = 1;
  sim::SimConfig config;
  std::string runlog_dir;  // per-trial deploy logs when non-empty
};

/// Splits a deploy run into grasp attempts. An attempt ends when the
/// gripper is commanded open after a lift of more than 3 cm with the
/// gripper closed, or after the per-attempt timeout. Success means an
/// object reached the box during the attempt; it is judged shortly after
/// the open command so the release has time to happen.
class AttemptTracker {
 public:
  AttemptTracker(int attempts, Micros timeout, Micros start);

  /// Feed one world snapshot per control tick. Returns false once all
  /// attempts are decided.
  bool update(const sim::WorldState& w, Micros now);
  const std::vector<bool>& outcomes() const { return outcomes_; }
  bool done() const { return static_cast<int>(outcomes_.size()) >= attempts_; }

 private:
  enum class Phase { open, closed, lifted };
  void finish(bool success, Micros now);

  int attempts_;
  Micros timeout_;
  Micros attempt_start_;
  int deposited_at_start_ = -1;
  Phase phase_ = Phase::open;
  double close_z_ = 0;
  bool pending_ = false;
  Micros pending_until_{0};
  std::vector<bool> outcomes_;
};

/// One fully isolated trial: fresh clock, devices and policy server.
TrialRecord run_trial(const EvalConfig& cfg, int trial_id, std::vector<double>* latencies = nullptr);

struct EvalResult {
  std::vector<TrialRecord> records;
  std::vector<double> latencies_ms;
};

/// Runs cfg.trials trials with seeds base_seed + trial_id, sequentially or
/// sharded over cfg.parallel workers. Records come back in trial order.
EvalResult run_trials(const EvalConfig& cfg, std::function<void(const TrialRecord&)> progress = nullptr);

}  // namespace vilas::eval
