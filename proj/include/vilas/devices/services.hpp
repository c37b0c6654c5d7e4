#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>

#include "vilas/devices/sim_host.hpp"
#include "vilas/transport/server.hpp"

namespace vilas::devices {

inline constexpr std::uint16_t kArmPort = 5601;
inline constexpr std::uint16_t kGripperPort = 5602;
inline constexpr std::uint16_t kCameraPort = 5605;

/// arm.command, arm.state, sys.reset, world.debug, ping.
transport::Handler arm_handler(SimHost& host);

/// grip.command, grip.state, sys.reset, ping.
transport::Handler gripper_handler(SimHost& host);

/// Both camera images at 224x224, encoded as PNG.
struct CapturedFrame {
  std::int64_t window = -1;  // 30 Hz capture window index
  double timestamp_ms = 0;
  std::string base_png;
  std::string wrist_png;
};

/// cam.get. Renders at most once per 1/30 s window and serves the cached
/// pair in between; both images share one capture timestamp.
class CameraService {
 public:
  explicit CameraService(SimHost& host) : host_(host) {}

  CapturedFrame capture();
  transport::Handler handler();

 private:
  SimHost& host_;
  std::mutex mu_;
  CapturedFrame cache_;
};

/// The three device services over one shared world.
class DeviceHost {
 public:
  struct Ports {
    std::uint16_t arm = kArmPort;
    std::uint16_t gripper = kGripperPort;
    std::uint16_t camera = kCameraPort;
    std::string bind_host = "127.0.0.1";
    static Ports ephemeral() { return {0, 0, 0, "127.0.0.1"}; }
  };

  DeviceHost(sim::SimConfig config, Clock& clock, std::uint64_t seed, int n_objects, Ports ports);
  ~DeviceHost();

  SimHost& sim() { return sim_; }
  transport::Address arm_address() const { return arm_->address(); }
  transport::Address gripper_address() const { return gripper_->address(); }
  transport::Address camera_address() const { return camera_server_->address(); }
  void stop();

 private:
  SimHost sim_;
  CameraService camera_;
  std::unique_ptr<transport::Server> arm_;
  std::unique_ptr<transport::Server> gripper_;
  std::unique_ptr<transport::Server> camera_server_;
};

}  // namespace vilas::devices
