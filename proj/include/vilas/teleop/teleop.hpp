#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vilas/clock.hpp"
#include "vilas/devices/client.hpp"
#include "vilas/latest_value.hpp"
#include "vilas/sim/model.hpp"

namespace vilas::teleop {

using sim::StateVector;

/// Per-joint leader-to-follower map: follower = sign * leader + offset.
struct LeaderCalibration {
  StateVector offset{};
  std::array<int, sim::kStateDim> sign{1, 1, 1, 1, 1, 1, 1};

  StateVector apply(const StateVector& leader) const;
  void validate() const;

  static LeaderCalibration load(const std::string& path);
  void save(const std::string& path) const;
};

void to_json(nlohmann::json& j, const LeaderCalibration& c);
void from_json(const nlohmann::json& j, LeaderCalibration& c);

/// Offsets from leader samples taken while the follower sits at a known
/// reference pose. Needs at least 10 samples; throws calibration_unstable
/// when any joint's sample standard deviation exceeds max_std.
LeaderCalibration calibrate(const std::vector<StateVector>& samples, const StateVector& reference,
                            const std::array<int, sim::kStateDim>& sign = {1, 1, 1, 1, 1, 1, 1},
                            double max_std = 0.01);

/// Clamps the arm part to joint limits and the gripper to [0, 1].
StateVector clamp_command(const sim::SimConfig& config, const StateVector& v);

struct LeaderSample {
  StateVector q{};
  Micros stamp{0};  // clock time the sample was produced
};

/// Anything that supplies leader joint vectors. poll() returns the newest
/// sample or nothing when the source has produced none yet.
class LeaderSource {
 public:
  virtual ~LeaderSource() = default;
  virtual void start(Micros now) { (void)now; }
  virtual std::optional<LeaderSample> poll(Micros now) = 0;
  /// True once a finite source has nothing more to give.
  virtual bool finished(Micros now) const {
    (void)now;
    return false;
  }
};

/// Piecewise-linear trajectory of {t_s, q[7]} waypoints.
class Trajectory {
 public:
  struct Waypoint {
    double t_s = 0;
    StateVector q{};
  };

  explicit Trajectory(std::vector<Waypoint> points);
  static Trajectory load(const std::string& path);
  static Trajectory from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  /// Holds the end values outside the waypoint span.
  StateVector at(double t_s) const;
  double duration() const { return points_.back().t_s; }
  const std::vector<Waypoint>& points() const { return points_; }

 private:
  std::vector<Waypoint> points_;
};

/// Evaluates a trajectory at the poll time.
class ScriptedSource final : public LeaderSource {
 public:
  explicit ScriptedSource(Trajectory traj, bool loop = false) : traj_(std::move(traj)), loop_(loop) {}
  void start(Micros now) override { start_ = now; }
  std::optional<LeaderSample> poll(Micros now) override;

 private:
  Trajectory traj_;
  bool loop_;
  Micros start_{0};
};

/// Replays a recorded action sequence at its record rate; sample i becomes
/// current at i / rate seconds.
class ReplaySource final : public LeaderSource {
 public:
  ReplaySource(std::vector<StateVector> actions, double rate_hz);
  static ReplaySource from_episode(const std::string& path);

  void start(Micros now) override { start_ = now; }
  std::optional<LeaderSample> poll(Micros now) override;
  bool finished(Micros now) const override;

 private:
  std::vector<StateVector> actions_;
  double rate_hz_;
  Micros start_{0};
};

/// Fed from outside (the WebSocket bridge). Holds the last sample between
/// updates; arm and gripper channels may arrive separately.
class PushSource final : public LeaderSource {
 public:
  explicit PushSource(Clock& clock, StateVector initial = {}) : clock_(clock), pending_(initial) {}
  void set_arm(const sim::JointVector& q);
  void set_grip(double g);
  std::optional<LeaderSample> poll(Micros now) override;
  bool has_sample() const { return cell_.seq() > 0; }

 private:
  Clock& clock_;
  std::mutex mu_;
  StateVector pending_;
  LatestValue<LeaderSample> cell_;
};

struct TeleopConfig {
  double rate_hz = 83.3;
  Micros stall_timeout{500'000};
  double grip_force = 50.0;
  int max_retries = 3;
  Micros retry_backoff{5'000};  // doubled per retry
  std::optional<Micros> duration;

  /// 83.3 Hz maps to exactly 12 ms.
  Micros tick() const;
};

struct TeleopStats {
  std::int64_t ticks = 0;
  std::int64_t commands = 0;
  std::int64_t missed_ticks = 0;
  std::int64_t stall_ticks = 0;
  std::int64_t stall_events = 0;
  std::int64_t retries = 0;
  std::int64_t failed_commands = 0;
  double elapsed_s = 0;
  double achieved_rate_hz = 0;
  bool stalled = false;

  nlohmann::json to_json() const;
};

/// Commanded follower target, as seen by the recorder.
struct ActionSample {
  StateVector action{};
  Micros stamp{0};
};

/// Fixed-tick forwarding loop. Each tick reads the freshest leader sample,
/// maps it through the calibration, clamps, and sends arm.command and
/// grip.command. Ticks run on absolute deadlines; a late tick skips the
/// deadlines it overran (counted as missed).
class TeleopLoop {
 public:
  TeleopLoop(Clock& clock, devices::DeviceClient& devices, LeaderSource& source, LeaderCalibration calib,
             sim::SimConfig config, TeleopConfig cfg = {});

  TeleopStats run();
  void request_stop() { stop_ = true; }
  bool stop_requested() const { return stop_; }

  const LatestValue<ActionSample>& action_tap() const { return tap_; }
  TeleopStats stats() const;

 private:
  bool send_with_retry(const StateVector& cmd);

  Clock& clock_;
  devices::DeviceClient& devices_;
  LeaderSource& source_;
  LeaderCalibration calib_;
  sim::SimConfig config_;
  TeleopConfig cfg_;
  std::atomic<bool> stop_{false};
  LatestValue<ActionSample> tap_;
  mutable std::mutex stats_mu_;
  TeleopStats stats_;
};

}  // namespace vilas::teleop
