#include "vilas/devices/client.hpp"

namespace vilas::devices {

using nlohmann::json;

DeviceEndpoints DeviceEndpoints::from_env() {
  DeviceEndpoints e;
  e.arm = transport::address_from_env("VILAS_ARM_ADDR", e.arm);
  e.gripper = transport::address_from_env("VILAS_GRIPPER_ADDR", e.gripper);
  e.camera = transport::address_from_env("VILAS_CAMERA_ADDR", e.camera);
  return e;
}

DeviceClient::DeviceClient(DeviceEndpoints endpoints, Micros timeout)
    : endpoints_(std::move(endpoints)),
      timeout_(timeout),
      arm_(endpoints_.arm, timeout),
      grip_(endpoints_.gripper, timeout),
      cam_(endpoints_.camera, timeout) {}

sim::JointVector DeviceClient::arm_command(const sim::JointVector& q) {
  std::lock_guard lk(arm_mu_);
  const auto reply = arm_.call("arm.command", {{"q_target", q}}, timeout_);
  return reply.body.at("q_target").get<sim::JointVector>();
}

ArmState DeviceClient::arm_state() {
  std::lock_guard lk(arm_mu_);
  const auto reply = arm_.call("arm.state", json::object(), timeout_);
  const auto& b = reply.body;
  ArmState s;
  s.q = b.at("q").get<sim::JointVector>();
  s.q_target = b.at("q_target").get<sim::JointVector>();
  const auto& tcp = b.at("tcp");
  s.tcp.position = {tcp.at("x").get<double>(), tcp.at("y").get<double>(), tcp.at("z").get<double>()};
  s.tcp.yaw = tcp.at("yaw").get<double>();
  s.timestamp_ms = b.at("timestamp_ms").get<double>();
  return s;
}

GripAck DeviceClient::grip_command(double g, double force, double speed) {
  std::lock_guard lk(grip_mu_);
  const auto reply = grip_.call("grip.command", {{"g", g}, {"force", force}, {"speed", speed}}, timeout_);
  return {reply.body.at("force").get<double>(), reply.body.at("force_clamped").get<bool>()};
}

GripState DeviceClient::grip_state() {
  std::lock_guard lk(grip_mu_);
  const auto reply = grip_.call("grip.state", json::object(), timeout_);
  const auto& b = reply.body;
  GripState s;
  s.g = b.at("g").get<double>();
  s.g_target = b.at("g_target").get<double>();
  s.width_mm = b.at("width_mm").get<double>();
  s.contact_force = b.at("force").get<double>();
  s.force_cmd = b.at("force_cmd").get<double>();
  s.speed = b.at("speed").get<double>();
  s.timestamp_ms = b.at("timestamp_ms").get<double>();
  return s;
}

CameraImages DeviceClient::cam_get() {
  std::lock_guard lk(cam_mu_);
  const auto reply = cam_.call("cam.get", {{"camera", "both"}}, timeout_);
  const auto& b = reply.body;
  CameraImages img;
  img.timestamp_ms = b.at("timestamp_ms").get<double>();
  img.base_png = base64_decode(b.at("images").at("base").get<std::string>());
  img.wrist_png = base64_decode(b.at("images").at("wrist").get<std::string>());
  return img;
}

void DeviceClient::reset(std::uint64_t seed, int n_objects) {
  std::lock_guard lk(arm_mu_);
  arm_.call("sys.reset", {{"seed", seed}, {"n_objects", n_objects}}, timeout_);
}

sim::WorldState DeviceClient::world_debug() {
  std::lock_guard lk(arm_mu_);
  const auto reply = arm_.call("world.debug", json::object(), timeout_);
  return sim::world_from_json(reply.body.at("world"));
}

}  // namespace vilas::devices
