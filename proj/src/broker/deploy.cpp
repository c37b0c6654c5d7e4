#include "vilas/broker/deploy.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

#include "vilas/error.hpp"
#include "vilas/transport/client.hpp"

namespace vilas::broker {

using nlohmann::json;

Micros DeployConfig::period() const {
  if (!(control_rate_hz > 0)) throw Error(Errc::invalid_argument, "control rate must be positive");
  return from_seconds(1.0 / control_rate_hz);
}

std::vector<double> DeployResult::latencies_ms() const {
  std::vector<double> out;
  for (const auto& e : inferences)
    if (e.ok) out.push_back(e.latency_ms);
  return out;
}

std::vector<Micros> DeployResult::call_times() const {
  std::vector<Micros> out;
  for (const auto& e : inferences)
    if (e.ok) out.push_back(e.t_send);
  return out;
}

DeployLoop::DeployLoop(Clock& clock, devices::DeviceClient& devices, PolicyAdapter& policy, DeployConfig config)
    : clock_(clock), devices_(devices), policy_(policy), config_(std::move(config)) {
  if (config_.horizon < 1) throw Error(Errc::invalid_argument, "horizon must be at least 1");
  if (!config_.log_path.empty()) {
    log_.open(config_.log_path, std::ios::app);
    if (!log_) throw Error(Errc::io, "cannot open run log " + config_.log_path);
  }
}

void DeployLoop::log(const json& line) {
  if (log_.is_open()) log_ << line.dump() << '\n';
}

std::optional<ActionChunk> DeployLoop::infer(std::int64_t tick, DeployResult& result) {
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) ++result.retries;
    InferEvent ev;
    ev.tick = tick;
    ev.attempt = attempt;
    std::optional<ActionChunk> chunk;
    try {
      const Observation obs = build_observation(devices_, config_.prompt, clock_);
      ev.t_send = clock_.now();
      {
        // The server may spend clock time (injected latency); let it.
        ClockYield yield(clock_);
        chunk = policy_.infer(obs, config_.horizon, config_.infer_timeout);
      }
      const Micros done = clock_.now();
      ev.latency_ms = to_ms(done - ev.t_send);
      if (done - ev.t_send > config_.infer_timeout) {
        chunk.reset();
        throw Error(Errc::timeout, "inference exceeded the timeout");
      }
      ev.seq = chunk->seq;
      ev.ok = true;
      chunk->issued_at_ms = to_ms(done);
    } catch (const Error& e) {
      if (ev.t_send.count() == 0) ev.t_send = clock_.now();
      ev.error = std::string(errc_name(e.code())) + ": " + e.what();
      spdlog::warn("deploy: inference attempt {} failed: {}", attempt + 1, e.what());
    }
    result.inferences.push_back(ev);
    json line = {{"ev", "infer"},
                 {"tick", ev.tick},
                 {"seq", ev.seq},
                 {"t_ms", to_ms(ev.t_send)},
                 {"latency_ms", ev.latency_ms},
                 {"attempt", ev.attempt},
                 {"ok", ev.ok}};
    if (!ev.ok) line["error"] = ev.error;
    log(line);
    if (chunk) return chunk;
  }
  return std::nullopt;
}

DeployResult DeployLoop::run() {
  ClockParticipant member(clock_);
  DeployResult result;
  const Micros period = config_.period();
  const Micros start = clock_.now();
  log({{"ev", "start"},
       {"t_ms", to_ms(start)},
       {"horizon", config_.horizon},
       {"rate_hz", config_.control_rate_hz},
       {"protocol", protocol_name(policy_.protocol())}});

  std::optional<ActionChunk> chunk;
  int k = 0;
  double last_latency = 0;
  Micros next = start;
  std::int64_t tick = 0;
  while (!stop_) {
    if (config_.duration && clock_.now() - start >= *config_.duration) break;
    if (!chunk || k >= config_.horizon) {
      chunk = infer(tick, result);
      if (!chunk) {
        result.aborted = true;
        result.abort_reason = std::string(errc_name(Errc::policy_unavailable)) + ": no valid chunk after " + std::to_string(config_.max_retries) +
                              " retries";
        log({{"ev", "abort"}, {"t_ms", to_ms(clock_.now())}, {"reason", result.abort_reason}});
        break;
      }
      last_latency = result.inferences.back().latency_ms;
      k = 0;
      next = clock_.now();  // re-anchor after the blocking call
      if (config_.duration && next - start >= *config_.duration) break;
    }

    StateVector a = chunk->actions[static_cast<std::size_t>(k)];
    const double g = a[sim::kArmDof];
    if (g < 0.0 || g > 1.0) {
      ++result.clamped_gripper;
      spdlog::debug("deploy: gripper action {} clamped", g);
      a[sim::kArmDof] = std::clamp(g, 0.0, 1.0);
    }
    const auto js = sim::JointState::from_flat(a);
    try {
      devices_.arm_command(js.q);
      devices_.grip_command(js.g, config_.grip_force);
    } catch (const Error& e) {
      spdlog::warn("deploy: command at tick {} failed: {}", tick, e.what());
    }
    TickEvent te{tick, chunk->seq, k, clock_.now(), a};
    log({{"ev", "tick"},
         {"tick", tick},
         {"seq", te.seq},
         {"k", k},
         {"t_ms", to_ms(te.t)},
         {"latency_ms", last_latency}});
    ++result.ticks;
    ++tick;
    ++k;
    if (tick_hook_ && !tick_hook_(te)) break;

    next += period;
    clock_.sleep_until(next);
  }
  log({{"ev", "end"}, {"t_ms", to_ms(clock_.now())}, {"ticks", result.ticks}});
  if (log_.is_open()) log_.flush();
  return result;
}

std::vector<double> read_latencies(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open run log " + path);
  std::vector<double> out;
  std::string line;
  std::int64_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& e) {
      throw Error(Errc::integrity, path + ": line " + std::to_string(n) + ": " + e.what());
    }
    if (j.value("ev", "") == "infer" && j.value("ok", false)) out.push_back(j.at("latency_ms").get<double>());
  }
  return out;
}

}  // namespace vilas::broker
