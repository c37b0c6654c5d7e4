#pragma once

#include <cstdint>
#include <mutex>

#include "vilas/clock.hpp"
#include "vilas/sim/world.hpp"

namespace vilas::devices {

/// Internal simulation tick: 250 Hz.
inline constexpr Micros kSimTick{4000};

/// Shared world handle behind the device services. Simulated time is a
/// function of the clock alone: before any access the world is stepped in
/// 4 ms ticks up to the current clock time, so request traffic never moves
/// the dynamics. All mutations go through one mutex (single writer).
class SimHost {
 public:
  SimHost(sim::SimConfig config, Clock& clock, std::uint64_t seed, int n_objects);

  const sim::SimConfig& config() const { return config_; }
  Clock& clock() { return clock_; }

  /// Value copy of the world at the current clock time.
  sim::WorldState snapshot();

  /// Sets the arm joint target after clamping; returns the applied target.
  sim::JointVector command_arm(const sim::JointVector& q);
  void command_gripper(double g, double force, double speed);

  /// Rescatters objects with the given seed and homes the arm.
  void reset(std::uint64_t seed, int n_objects);

 private:
  void catch_up_locked();

  sim::SimConfig config_;
  Clock& clock_;
  std::mutex mu_;
  sim::WorldState world_;
  sim::JointState target_;
  Micros epoch_{0};
};

}  // namespace vilas::devices
