#include "vilas/devices/services.hpp"

#include <algorithm>
#include <cmath>

#include "vilas/image.hpp"
#include "vilas/sim/render.hpp"

namespace vilas::devices {

using nlohmann::json;
using transport::Envelope;
using transport::ReplyError;
using transport::RequestContext;
using transport::Router;

namespace {

double timestamp_ms(SimHost& host) { return to_ms(host.clock().now()); }

Envelope handle_reset(SimHost& host, const json& body) {
  const auto seed = body.value("seed", std::uint64_t{0});
  const int n = body.value("n_objects", host.config().task.n_objects);
  if (n < 0) throw ReplyError("bad-count", "n_objects must be non-negative");
  host.reset(seed, n);
  return {"sys.ack", 0, {{"seed", seed}, {"n_objects", n}}};
}

Envelope pong(const json&, const RequestContext&) { return {"pong"}; }

}  // namespace

transport::Handler arm_handler(SimHost& host) {
  return Router{}
      .on("arm.command",
          [&host](const json& body, const RequestContext&) {
            auto it = body.find("q_target");
            if (it == body.end() || !it->is_array()) {
              throw ReplyError("bad-arity", "q_target must be an array of 6 joint angles");
            }
            if (it->size() != sim::kArmDof) {
              throw ReplyError("bad-arity", "q_target has " + std::to_string(it->size()) + " entries, expected 6");
            }
            sim::JointVector q{};
            for (int i = 0; i < sim::kArmDof; ++i) {
              const auto& v = (*it)[i];
              if (!v.is_number() || !std::isfinite(v.get<double>())) {
                throw ReplyError("non-finite", "q_target entries must be finite numbers");
              }
              q[i] = v.get<double>();
            }
            const auto applied = host.command_arm(q);
            return Envelope{"arm.ack", 0, {{"q_target", applied}, {"clamped", applied != q}}};
          })
      .on("arm.state",
          [&host](const json&, const RequestContext&) {
            const auto w = host.snapshot();
            return Envelope{"arm.state",
                            0,
                            {{"q", w.joints.q},
                             {"q_target", w.target.q},
                             {"tcp",
                              {{"x", w.tcp.position.x},
                               {"y", w.tcp.position.y},
                               {"z", w.tcp.position.z},
                               {"yaw", w.tcp.yaw}}},
                             {"sim_time", w.sim_time},
                             {"timestamp_ms", timestamp_ms(host)}}};
          })
      .on("world.debug",
          [&host](const json&, const RequestContext&) {
            const auto w = host.snapshot();
            return Envelope{"world.state", 0, {{"world", sim::world_to_json(w)}, {"timestamp_ms", timestamp_ms(host)}}};
          })
      .on("sys.reset", [&host](const json& body, const RequestContext&) { return handle_reset(host, body); })
      .on("ping", pong)
      .handler();
}

transport::Handler gripper_handler(SimHost& host) {
  return Router{}
      .on("grip.command",
          [&host](const json& body, const RequestContext&) {
            auto g = body.find("g");
            if (g == body.end() || !g->is_number()) throw ReplyError("bad-request", "g must be a number");
            const double gv = g->get<double>();
            if (!(gv >= 0.0 && gv <= 1.0)) throw ReplyError("g-out-of-range", "g must lie in [0, 1]");
            const auto& model = host.config().gripper;
            const double requested = body.value("force", model.force_max);
            const double speed = body.value("speed", 1.0);
            if (!std::isfinite(requested) || !std::isfinite(speed)) {
              throw ReplyError("non-finite", "force and speed must be finite");
            }
            const double force = std::clamp(requested, model.force_min, model.force_max);
            host.command_gripper(gv, force, speed);
            return Envelope{"grip.ack",
                            0,
                            {{"g", gv}, {"force", force}, {"force_clamped", force != requested}, {"speed", speed}}};
          })
      .on("grip.state",
          [&host](const json&, const RequestContext&) {
            const auto w = host.snapshot();
            return Envelope{"grip.state",
                            0,
                            {{"g", w.joints.g},
                             {"g_target", w.target.g},
                             {"width_mm", host.config().gripper.width(w.joints.g) * 1000.0},
                             {"force", w.contact_force},
                             {"force_cmd", w.grip_force},
                             {"speed", w.grip_speed},
                             {"timestamp_ms", timestamp_ms(host)}}};
          })
      .on("sys.reset", [&host](const json& body, const RequestContext&) { return handle_reset(host, body); })
      .on("ping", pong)
      .handler();
}

CapturedFrame CameraService::capture() {
  const Micros now = host_.clock().now();
  const std::int64_t window = now.count() * 30 / 1'000'000;
  std::lock_guard lk(mu_);
  if (cache_.window == window) return cache_;
  const auto w = host_.snapshot();
  const auto& cfg = host_.config();
  const int size = cfg.camera.output_size;
  cache_.window = window;
  cache_.timestamp_ms = to_ms(now);
  cache_.base_png = encode_png(resize_bilinear(sim::render(cfg, w, sim::Camera::base), size, size));
  cache_.wrist_png = encode_png(resize_bilinear(sim::render(cfg, w, sim::Camera::wrist), size, size));
  return cache_;
}

transport::Handler CameraService::handler() {
  return Router{}
      .on("cam.get",
          [this](const json& body, const RequestContext&) {
            const std::string which = body.value("camera", "both");
            if (which != "both" && which != "base" && which != "wrist") {
              throw ReplyError("unknown-camera", "unknown camera '" + which + "'");
            }
            const CapturedFrame f = capture();
            json images = json::object();
            if (which != "wrist") images["base"] = base64_encode(f.base_png);
            if (which != "base") images["wrist"] = base64_encode(f.wrist_png);
            const int size = host_.config().camera.output_size;
            return Envelope{"cam.frame",
                            0,
                            {{"timestamp_ms", f.timestamp_ms},
                             {"width", size},
                             {"height", size},
                             {"encoding", "png/base64"},
                             {"images", images}}};
          })
      .on("ping", pong)
      .handler();
}

DeviceHost::DeviceHost(sim::SimConfig config, Clock& clock, std::uint64_t seed, int n_objects, Ports ports)
    : sim_(std::move(config), clock, seed, n_objects), camera_(sim_) {
  arm_ = std::make_unique<transport::Server>(transport::Address{ports.bind_host, ports.arm}, arm_handler(sim_), "arm");
  gripper_ = std::make_unique<transport::Server>(transport::Address{ports.bind_host, ports.gripper},
                                                 gripper_handler(sim_), "gripper");
  camera_server_ = std::make_unique<transport::Server>(transport::Address{ports.bind_host, ports.camera},
                                                       camera_.handler(), "camera");
}

DeviceHost::~DeviceHost() { stop(); }

void DeviceHost::stop() {
  if (arm_) arm_->stop();
  if (gripper_) gripper_->stop();
  if (camera_server_) camera_server_->stop();
}

}  // namespace vilas::devices
