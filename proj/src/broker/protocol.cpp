#include "vilas/broker/protocol.hpp"

#include <cmath>

#include "vilas/error.hpp"
#include "vilas/image.hpp"
#include "vilas/transport/client.hpp"

namespace vilas::broker {

using nlohmann::json;

json observation_to_json(const Observation& obs) {
  return {{"joints", obs.joints},
          {"images",
           {{"base", base64_encode(obs.base_png)},
            {"wrist", base64_encode(obs.wrist_png)},
            {"timestamp_ms", obs.image_timestamp_ms},
            {"width", 224},
            {"height", 224}}},
          {"prompt", obs.prompt},
          {"pad", obs.pad},
          {"timestamp_ms", obs.timestamp_ms}};
}

Observation observation_from_json(const json& j) {
  try {
    Observation o;
    const auto& joints = j.at("joints");
    if (!joints.is_array() || joints.size() != sim::kStateDim) {
      throw std::invalid_argument("joints must have 7 entries");
    }
    joints.get_to(o.joints);
    for (double v : o.joints) {
      if (!std::isfinite(v)) throw std::invalid_argument("joints must be finite");
    }
    const auto& images = j.at("images");
    o.base_png = base64_decode(images.at("base").get<std::string>());
    o.wrist_png = base64_decode(images.at("wrist").get<std::string>());
    o.image_timestamp_ms = images.value("timestamp_ms", 0.0);
    o.prompt = j.at("prompt").get<std::string>();
    const auto& pad = j.at("pad");
    if (!pad.is_array() || pad.size() != sim::kStateDim) throw std::invalid_argument("pad must have 7 entries");
    pad.get_to(o.pad);
    o.timestamp_ms = j.value("timestamp_ms", 0.0);
    return o;
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(Errc::protocol, std::string("malformed observation: ") + e.what());
  }
}

transport::Envelope infer_request(const Observation& obs, std::uint64_t id) {
  return {"infer", id, {{"observation", observation_to_json(obs)}}};
}

transport::Envelope chunk_reply(const ActionChunk& chunk, std::uint64_t id) {
  return {"chunk", id, {{"horizon", chunk.horizon}, {"actions", chunk.actions}, {"seq", chunk.seq}}};
}

ActionChunk parse_chunk(const transport::Envelope& reply, int expected_horizon) {
  if (reply.t == "error") {
    throw transport::RemoteError(reply.body.value("code", "error"), reply.body.value("message", ""));
  }
  if (reply.t != "chunk") throw Error(Errc::chunk_shape, "expected a chunk reply, got '" + reply.t + "'");
  ActionChunk c;
  try {
    c.horizon = reply.body.at("horizon").get<int>();
    c.seq = reply.body.value("seq", std::uint64_t{0});
    const auto& rows = reply.body.at("actions");
    if (!rows.is_array()) throw Error(Errc::chunk_shape, "actions must be a matrix");
    for (const auto& row : rows) {
      if (!row.is_array() || row.size() != sim::kStateDim) {
        throw Error(Errc::chunk_shape, "every action row must have 7 entries");
      }
      StateVector a{};
      for (int i = 0; i < sim::kStateDim; ++i) {
        if (!row[i].is_number()) throw Error(Errc::chunk_shape, "action entries must be numbers");
        a[i] = row[i].get<double>();
        if (!std::isfinite(a[i])) throw Error(Errc::chunk_shape, "non-finite action entry");
      }
      c.actions.push_back(a);
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(Errc::chunk_shape, std::string("malformed chunk: ") + e.what());
  }
  if (c.horizon != expected_horizon || static_cast<int>(c.actions.size()) != expected_horizon) {
    throw Error(Errc::chunk_shape, "chunk has " + std::to_string(c.actions.size()) + " rows (horizon " +
                                       std::to_string(c.horizon) + "), expected " + std::to_string(expected_horizon));
  }
  return c;
}

Observation build_observation(devices::DeviceClient& devices, const std::string& prompt, Clock& clock) {
  try {
    Observation o;
    const auto cam = devices.cam_get();
    const auto arm = devices.arm_state();
    const auto grip = devices.grip_state();
    for (int i = 0; i < sim::kArmDof; ++i) o.joints[i] = arm.q[i];
    o.joints[sim::kArmDof] = grip.g;
    o.base_png = cam.base_png;
    o.wrist_png = cam.wrist_png;
    o.image_timestamp_ms = cam.timestamp_ms;
    o.prompt = prompt;
    o.timestamp_ms = to_ms(clock.now());
    return o;
  } catch (const Error& e) {
    throw Error(Errc::observation_unavailable, std::string("observation unavailable: ") + e.what());
  }
}

}  // namespace vilas::broker
