#pragma once

#include <mutex>
#include <string>

#include "vilas/devices/services.hpp"
#include "vilas/sim/world.hpp"
#include "vilas/transport/client.hpp"

namespace vilas::devices {

struct DeviceEndpoints {
  transport::Address arm{"127.0.0.1", kArmPort};
  transport::Address gripper{"127.0.0.1", kGripperPort};
  transport::Address camera{"127.0.0.1", kCameraPort};

  /// VILAS_ARM_ADDR, VILAS_GRIPPER_ADDR, VILAS_CAMERA_ADDR.
  static DeviceEndpoints from_env();
};

struct ArmState {
  sim::JointVector q{};
  sim::JointVector q_target{};
  sim::TcpPose tcp;
  double timestamp_ms = 0;
};

struct GripState {
  double g = 0;
  double g_target = 0;
  double width_mm = 0;
  double contact_force = 0;
  double force_cmd = 0;
  double speed = 0;
  double timestamp_ms = 0;
};

struct GripAck {
  double force = 0;
  bool force_clamped = false;
};

struct CameraImages {
  double timestamp_ms = 0;
  std::string base_png;  // raw PNG bytes
  std::string wrist_png;
};

/// Typed client for the three device services. Safe to share between
/// threads; each service connection is used by one caller at a time.
class DeviceClient {
 public:
  explicit DeviceClient(DeviceEndpoints endpoints, Micros timeout = Micros(1'000'000));

  sim::JointVector arm_command(const sim::JointVector& q);
  ArmState arm_state();
  GripAck grip_command(double g, double force = 50.0, double speed = 1.0);
  GripState grip_state();
  CameraImages cam_get();
  void reset(std::uint64_t seed, int n_objects);
  sim::WorldState world_debug();

  const DeviceEndpoints& endpoints() const { return endpoints_; }

 private:
  DeviceEndpoints endpoints_;
  Micros timeout_;
  std::mutex arm_mu_, grip_mu_, cam_mu_;
  transport::Client arm_, grip_, cam_;
};

}  // namespace vilas::devices
