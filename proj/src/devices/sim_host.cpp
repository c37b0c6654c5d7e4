#include "vilas/devices/sim_host.hpp"

#include <algorithm>

namespace vilas::devices {

namespace {
constexpr double kTickSeconds = 0.004;
}

SimHost::SimHost(sim::SimConfig config, Clock& clock, std::uint64_t seed, int n_objects)
    : config_(std::move(config)), clock_(clock) {
  config_.validate();
  reset(seed, n_objects);
}

void SimHost::reset(std::uint64_t seed, int n_objects) {
  std::lock_guard lk(mu_);
  world_ = sim::make_world(config_, seed, n_objects);
  target_ = world_.joints;
  epoch_ = clock_.now();
}

void SimHost::catch_up_locked() {
  const std::int64_t due = (clock_.now() - epoch_) / kSimTick;
  while (world_.ticks < due) {
    if (world_.joints == target_) {
      // At rest a step only advances time.
      world_.ticks = due;
      break;
    }
    world_ = sim::step(config_, world_, target_, kTickSeconds);
  }
  world_.sim_time = static_cast<double>(world_.ticks) * kTickSeconds;
}

sim::WorldState SimHost::snapshot() {
  std::lock_guard lk(mu_);
  catch_up_locked();
  return world_;
}

sim::JointVector SimHost::command_arm(const sim::JointVector& q) {
  std::lock_guard lk(mu_);
  catch_up_locked();
  target_.q = config_.arm.clamp(q);
  world_.target = target_;
  return target_.q;
}

void SimHost::command_gripper(double g, double force, double speed) {
  std::lock_guard lk(mu_);
  catch_up_locked();
  target_.g = std::clamp(g, 0.0, 1.0);
  world_.target = target_;
  world_.grip_force = force;
  world_.grip_speed = speed;
}

}  // namespace vilas::devices
