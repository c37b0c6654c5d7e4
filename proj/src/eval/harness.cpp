#include "vilas/eval/harness.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "vilas/broker/deploy.hpp"
#include "vilas/devices/services.hpp"

namespace vilas::eval {

namespace {
constexpr double kLiftThreshold = 0.03;
constexpr double kClosedAbove = 0.5;
constexpr double kOpenBelow = 0.2;
const Micros kSettleWindow{500'000};
}  // namespace

AttemptTracker::AttemptTracker(int attempts, Micros timeout, Micros start)
    : attempts_(attempts), timeout_(timeout), attempt_start_(start) {}

void AttemptTracker::finish(bool success, Micros now) {
  outcomes_.push_back(success);
  attempt_start_ = now;
  deposited_at_start_ = -1;
  pending_ = false;
}

bool AttemptTracker::update(const sim::WorldState& w, Micros now) {
  if (done()) return false;
  const int deposited = w.count(sim::ObjectStatus::deposited);
  if (deposited_at_start_ < 0) deposited_at_start_ = deposited;

  if (pending_) {
    if (deposited > deposited_at_start_ || now >= pending_until_) {
      const bool ok = deposited > deposited_at_start_;
      const int base = deposited;
      finish(ok, pending_until_ < now ? pending_until_ : now);
      deposited_at_start_ = base;
      if (done()) return false;
    }
  }

  const double g = w.target.g;
  const double z = w.tcp.position.z;
  switch (phase_) {
    case Phase::open:
      if (g > kClosedAbove) {
        phase_ = Phase::closed;
        close_z_ = z;
      }
      break;
    case Phase::closed:
      if (g < kOpenBelow) {
        phase_ = Phase::open;  // opened again without lifting: not an attempt
      } else if (z > close_z_ + kLiftThreshold) {
        phase_ = Phase::lifted;
      }
      break;
    case Phase::lifted:
      if (g < kOpenBelow) {
        phase_ = Phase::open;
        if (!pending_) {
          pending_ = true;
          pending_until_ = now + kSettleWindow;
        }
      }
      break;
  }

  if (!pending_ && now - attempt_start_ >= timeout_) {
    finish(false, now);
    phase_ = g > kClosedAbove ? Phase::closed : Phase::open;
    close_z_ = z;
  }
  return !done();
}

TrialRecord run_trial(const EvalConfig& cfg, int trial_id, std::vector<double>* latencies) {
  const auto wall0 = std::chrono::steady_clock::now();
  TrialRecord rec;
  rec.trial_id = trial_id;
  rec.seed = cfg.base_seed + static_cast<std::uint64_t>(trial_id);

  std::unique_ptr<Clock> clock;
  if (cfg.accelerated) {
    clock = std::make_unique<VirtualClock>();
  } else {
    clock = std::make_unique<RealClock>();
  }
  devices::DeviceHost host(cfg.config, *clock, rec.seed, cfg.n_objects, devices::DeviceHost::Ports::ephemeral());
  devices::DeviceClient dev({host.arm_address(), host.gripper_address(), host.camera_address()});

  policyd::ServerOptions so;
  so.spec = cfg.policy;
  so.horizon = cfg.horizon;
  so.control_rate_hz = cfg.control_rate_hz;
  so.latency = cfg.latency;
  so.seed = rec.seed;
  so.config = cfg.config;
  if (cfg.protocol == broker::Protocol::mq) {
    so.mq_bind = transport::Address{"127.0.0.1", 0};
    so.ws_bind.reset();
  } else {
    so.ws_bind = transport::Address{"127.0.0.1", 0};
    so.mq_bind.reset();
  }
  // The oracle reads the world over the privileged debug endpoint.
  auto world_client = std::make_shared<devices::DeviceClient>(
      devices::DeviceEndpoints{host.arm_address(), host.gripper_address(), host.camera_address()});
  so.world = [world_client] { return world_client->world_debug(); };
  policyd::PolicyServer server(*clock, so);

  auto adapter = broker::make_adapter(
      cfg.protocol, cfg.protocol == broker::Protocol::mq ? *server.mq_address() : *server.ws_address());
  adapter->reset(rec.seed, Micros(5'000'000));

  broker::DeployConfig dc;
  dc.control_rate_hz = cfg.control_rate_hz;
  dc.horizon = cfg.horizon;
  dc.prompt = cfg.config.task.object.name == "cherry" ? "pick up the cherries and place them in the box"
                                                        : "pick up the grapes and place them in the box";
  dc.duration = cfg.attempt_timeout * cfg.attempts + Micros(5'000'000);
  if (!cfg.runlog_dir.empty()) {
    std::filesystem::create_directories(cfg.runlog_dir);
    dc.log_path = (std::filesystem::path(cfg.runlog_dir) / fmt::format("trial_{:03d}.jsonl", trial_id)).string();
    std::filesystem::remove(dc.log_path);
  }
  broker::DeployLoop loop(*clock, dev, *adapter, dc);
  const Micros start = clock->now();
  AttemptTracker tracker(cfg.attempts, cfg.attempt_timeout, start);
  loop.on_tick([&](const broker::TickEvent& te) { return tracker.update(host.sim().snapshot(), te.t); });
  const auto result = loop.run();

  rec.attempt_outcomes = tracker.outcomes();
  // A run cut short by the overall budget leaves undecided attempts failed.
  while (static_cast<int>(rec.attempt_outcomes.size()) < cfg.attempts) rec.attempt_outcomes.push_back(false);
  rec.grasp_count = static_cast<int>(std::count(rec.attempt_outcomes.begin(), rec.attempt_outcomes.end(), true));
  rec.aborted = result.aborted;
  rec.abort_reason = result.abort_reason;
  rec.sim_time_s = to_seconds(clock->now() - start);
  rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  if (latencies) {
    const auto l = result.latencies_ms();
    latencies->insert(latencies->end(), l.begin(), l.end());
  }
  server.stop();
  host.stop();
  return rec;
}

EvalResult run_trials(const EvalConfig& cfg, std::function<void(const TrialRecord&)> progress) {
  if (cfg.trials < 0) throw Error(Errc::invalid_argument, "trial count must be non-negative");
  EvalResult out;
  out.records.resize(static_cast<std::size_t>(cfg.trials));
  std::vector<std::vector<double>> lat(static_cast<std::size_t>(cfg.trials));
  std::mutex mu;
  const int workers = std::max(1, std::min(cfg.parallel, std::max(cfg.trials, 1)));
  auto shard = [&](int w) {
    for (int t = w; t < cfg.trials; t += workers) {
      auto rec = run_trial(cfg, t, &lat[static_cast<std::size_t>(t)]);
      std::lock_guard lk(mu);
      out.records[static_cast<std::size_t>(t)] = rec;
      if (progress) progress(rec);
    }
  };
  if (workers == 1) {
    shard(0);
  } else {
    std::vector<std::thread> threads;
    for (int w = 0; w < workers; ++w) threads.emplace_back(shard, w);
    for (auto& t : threads) t.join();
  }
  for (const auto& l : lat) out.latencies_ms.insert(out.latencies_ms.end(), l.begin(), l.end());
  return out;
}

}  // namespace vilas::eval
