#include "vilas/teleop/teleop.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <spdlog/spdlog.h>

#include "vilas/error.hpp"
#include "vilas/recorder/episode.hpp"
#include "vilas/transport/client.hpp"

namespace vilas::teleop {

using nlohmann::json;

StateVector LeaderCalibration::apply(const StateVector& leader) const {
  StateVector out{};
  for (int i = 0; i < sim::kStateDim; ++i) out[i] = sign[i] * leader[i] + offset[i];
  return out;
}

void LeaderCalibration::validate() const {
  for (int i = 0; i < sim::kStateDim; ++i) {
    if (sign[i] != 1 && sign[i] != -1) {
      throw Error(Errc::invalid_argument, "calibration sign[" + std::to_string(i) + "] must be +1 or -1");
    }
    if (!std::isfinite(offset[i])) throw Error(Errc::non_finite, "calibration offset must be finite");
  }
}

void to_json(json& j, const LeaderCalibration& c) { j = json{{"offset", c.offset}, {"sign", c.sign}}; }

void from_json(const json& j, LeaderCalibration& c) {
  c = LeaderCalibration{};
  if (j.contains("offset")) j.at("offset").get_to(c.offset);
  if (j.contains("sign")) j.at("sign").get_to(c.sign);
  c.validate();
}

LeaderCalibration LeaderCalibration::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open calibration file " + path);
  return json::parse(in).get<LeaderCalibration>();
}

void LeaderCalibration::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error(Errc::io, "cannot write calibration file " + path);
  out << json(*this).dump(2) << "\n";
}

LeaderCalibration calibrate(const std::vector<StateVector>& samples, const StateVector& reference,
                            const std::array<int, sim::kStateDim>& sign, double max_std) {
  if (samples.size() < 10) {
    throw Error(Errc::invalid_argument,
                "calibrate: need at least 10 leader samples, got " + std::to_string(samples.size()));
  }
  LeaderCalibration c;
  c.sign = sign;
  c.validate();
  const double n = static_cast<double>(samples.size());
  for (int i = 0; i < sim::kStateDim; ++i) {
    double mean = 0;
    for (const auto& s : samples) mean += s[i];
    mean /= n;
    double var = 0;
    for (const auto& s : samples) var += (s[i] - mean) * (s[i] - mean);
    var /= n - 1;
    if (std::sqrt(var) > max_std) {
      throw Error(Errc::calibration_unstable, "calibrate: joint " + std::to_string(i) + " std " +
                                                  std::to_string(std::sqrt(var)) + " exceeds " +
                                                  std::to_string(max_std));
    }
    c.offset[i] = reference[i] - sign[i] * mean;
  }
  return c;
}

StateVector clamp_command(const sim::SimConfig& config, const StateVector& v) {
  const auto js = sim::JointState::from_flat(v);
  sim::JointState out{config.arm.clamp(js.q), std::clamp(js.g, 0.0, 1.0)};
  return out.flat();
}

// Trajectory

Trajectory::Trajectory(std::vector<Waypoint> points) : points_(std::move(points)) {
  if (points_.empty()) throw Error(Errc::invalid_argument, "trajectory needs at least one waypoint");
  for (std::size_t i = 1; i < points_.size(); ++i) {
    if (!(points_[i].t_s > points_[i - 1].t_s)) {
      throw Error(Errc::invalid_argument, "trajectory waypoint times must be strictly increasing");
    }
  }
}

Trajectory Trajectory::from_json(const json& j) {
  if (!j.is_array()) throw Error(Errc::invalid_argument, "trajectory must be a JSON list of waypoints");
  std::vector<Waypoint> pts;
  for (const auto& w : j) {
    Waypoint p;
    p.t_s = w.at("t_s").get<double>();
    const auto& q = w.at("q");
    if (!q.is_array() || q.size() != sim::kStateDim) {
      throw Error(Errc::invalid_argument, "trajectory waypoint q must have 7 entries");
    }
    q.get_to(p.q);
    pts.push_back(p);
  }
  return Trajectory(std::move(pts));
}

Trajectory Trajectory::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open trajectory file " + path);
  return from_json(json::parse(in));
}

json Trajectory::to_json() const {
  json out = json::array();
  for (const auto& p : points_) out.push_back({{"t_s", p.t_s}, {"q", p.q}});
  return out;
}

StateVector Trajectory::at(double t_s) const {
  if (t_s <= points_.front().t_s) return points_.front().q;
  if (t_s >= points_.back().t_s) return points_.back().q;
  auto hi = std::upper_bound(points_.begin(), points_.end(), t_s,
                             [](double t, const Waypoint& w) { return t < w.t_s; });
  auto lo = hi - 1;
  const double a = (t_s - lo->t_s) / (hi->t_s - lo->t_s);
  StateVector out{};
  for (int i = 0; i < sim::kStateDim; ++i) out[i] = lo->q[i] + a * (hi->q[i] - lo->q[i]);
  return out;
}

std::optional<LeaderSample> ScriptedSource::poll(Micros now) {
  double t = to_seconds(now - start_);
  if (loop_ && traj_.duration() > 0) t = std::fmod(t, traj_.duration());
  return LeaderSample{traj_.at(t), now};
}

ReplaySource::ReplaySource(std::vector<StateVector> actions, double rate_hz)
    : actions_(std::move(actions)), rate_hz_(rate_hz) {
  if (!(rate_hz_ > 0)) throw Error(Errc::invalid_argument, "replay rate must be positive");
}

ReplaySource ReplaySource::from_episode(const std::string& path) {
  const auto ep = recorder::load_episode(path, false);
  std::vector<StateVector> actions;
  actions.reserve(ep.frames.size());
  for (const auto& f : ep.frames) actions.push_back(f.action);
  return ReplaySource(std::move(actions), ep.meta.record_rate_hz);
}

std::optional<LeaderSample> ReplaySource::poll(Micros now) {
  if (actions_.empty()) return std::nullopt;
  const double t = to_seconds(now - start_);
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(std::floor(t * rate_hz_ + 1e-9)),
                                       actions_.size() - 1);
  return LeaderSample{actions_[i], start_ + from_seconds(static_cast<double>(i) / rate_hz_)};
}

bool ReplaySource::finished(Micros now) const {
  return to_seconds(now - start_) * rate_hz_ >= static_cast<double>(actions_.size());
}

void PushSource::set_arm(const sim::JointVector& q) {
  std::lock_guard lk(mu_);
  std::copy(q.begin(), q.end(), pending_.begin());
  cell_.put({pending_, clock_.now()});
}

void PushSource::set_grip(double g) {
  std::lock_guard lk(mu_);
  pending_[sim::kArmDof] = g;
  cell_.put({pending_, clock_.now()});
}

std::optional<LeaderSample> PushSource::poll(Micros) {
  auto s = cell_.get();
  if (!s) return std::nullopt;
  return s->value;
}

// Loop

Micros TeleopConfig::tick() const {
  if (!(rate_hz > 0)) throw Error(Errc::invalid_argument, "teleop rate must be positive");
  // Whole milliseconds when the rate is a rounded reciprocal (83.3 -> 12 ms).
  const double ms = 1000.0 / rate_hz;
  if (std::abs(ms - std::round(ms)) < 0.01) return Micros(static_cast<std::int64_t>(std::round(ms)) * 1000);
  return from_seconds(1.0 / rate_hz);
}

json TeleopStats::to_json() const {
  return {{"ticks", ticks},
          {"commands", commands},
          {"missed_ticks", missed_ticks},
          {"stall_ticks", stall_ticks},
          {"stall_events", stall_events},
          {"retries", retries},
          {"failed_commands", failed_commands},
          {"elapsed_s", elapsed_s},
          {"achieved_rate_hz", achieved_rate_hz},
          {"stalled", stalled}};
}

TeleopLoop::TeleopLoop(Clock& clock, devices::DeviceClient& devices, LeaderSource& source, LeaderCalibration calib,
                       sim::SimConfig config, TeleopConfig cfg)
    : clock_(clock),
      devices_(devices),
      source_(source),
      calib_(calib),
      config_(std::move(config)),
      cfg_(cfg) {
  calib_.validate();
}

TeleopStats TeleopLoop::stats() const {
  std::lock_guard lk(stats_mu_);
  return stats_;
}

bool TeleopLoop::send_with_retry(const StateVector& cmd) {
  const auto js = sim::JointState::from_flat(cmd);
  Micros backoff = cfg_.retry_backoff;
  for (int attempt = 0;; ++attempt) {
    try {
      devices_.arm_command(js.q);
      devices_.grip_command(js.g, cfg_.grip_force);
      return true;
    } catch (const transport::RemoteError& e) {
      spdlog::warn("teleop: command rejected: {}", e.what());
      return false;
    } catch (const Error& e) {
      if (attempt >= cfg_.max_retries) {
        spdlog::warn("teleop: command failed after {} retries: {}", attempt, e.what());
        return false;
      }
      {
        std::lock_guard lk(stats_mu_);
        ++stats_.retries;
      }
      clock_.sleep_for(backoff);
      backoff *= 2;
    }
  }
}

TeleopStats TeleopLoop::run() {
  ClockParticipant member(clock_);
  const Micros tick = cfg_.tick();
  const Micros start = clock_.now();
  source_.start(start);
  Micros next = start;

  while (!stop_) {
    Micros now = clock_.now();
    if (cfg_.duration && now - start >= *cfg_.duration) break;

    const auto sample = source_.poll(now);
    const bool stale = !sample || now - sample->stamp > cfg_.stall_timeout;
    bool sent = false;
    bool failed = false;
    if (!stale) {
      const StateVector cmd = clamp_command(config_, calib_.apply(sample->q));
      tap_.put({cmd, now});
      sent = send_with_retry(cmd);
      failed = !sent;
    }
    {
      std::lock_guard lk(stats_mu_);
      ++stats_.ticks;
      if (sent) ++stats_.commands;
      if (failed) ++stats_.failed_commands;
      if (stale) {
        ++stats_.stall_ticks;
        if (!stats_.stalled && sample) {
          ++stats_.stall_events;
          spdlog::warn("teleop: leader source stalled, commanding paused");
        }
        stats_.stalled = true;
      } else {
        stats_.stalled = false;
      }
    }
    if (source_.finished(now)) break;

    next += tick;
    now = clock_.now();
    if (now >= next + tick) {
      const auto behind = (now - next) / tick;
      next += behind * tick;
      std::lock_guard lk(stats_mu_);
      stats_.missed_ticks += behind;
    }
    clock_.sleep_until(next);
  }

  std::lock_guard lk(stats_mu_);
  const Micros end = clock_.now();
  stats_.elapsed_s = to_seconds(cfg_.duration ? std::min(end - start, *cfg_.duration) : end - start);
  stats_.achieved_rate_hz = stats_.elapsed_s > 0 ? static_cast<double>(stats_.commands) / stats_.elapsed_s : 0.0;
  return stats_;
}

}  // namespace vilas::teleop
