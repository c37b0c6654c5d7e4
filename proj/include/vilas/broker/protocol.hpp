#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vilas/clock.hpp"
#include "vilas/devices/client.hpp"
#include "vilas/sim/model.hpp"
#include "vilas/transport/frame.hpp"

namespace vilas::broker {

using sim::StateVector;

/// Unified policy input. Images are 224x224 PNG bytes; on the wire they are
/// base64 text. `pad` is the zero-filled placeholder some serving stacks
/// still expect.
struct Observation {
  StateVector joints{};
  std::string base_png;
  std::string wrist_png;
  double image_timestamp_ms = 0;
  std::string prompt;
  StateVector pad{};
  double timestamp_ms = 0;

  friend bool operator==(const Observation&, const Observation&) = default;
};

nlohmann::json observation_to_json(const Observation& obs);
/// Throws protocol on a malformed document.
Observation observation_from_json(const nlohmann::json& j);

/// {"t":"infer","id":id,"body":{"observation":{...}}}. The same document is
/// sent over both protocols.
transport::Envelope infer_request(const Observation& obs, std::uint64_t id);

struct ActionChunk {
  int horizon = 0;
  std::vector<StateVector> actions;
  std::uint64_t seq = 0;
  double issued_at_ms = 0;
};

/// {"t":"chunk","id":..,"body":{"horizon":H,"actions":[[7]...],"seq":n}}
transport::Envelope chunk_reply(const ActionChunk& chunk, std::uint64_t id);

/// Validates a reply: error replies become RemoteError, wrong shape or
/// non-finite entries become chunk_shape.
ActionChunk parse_chunk(const transport::Envelope& reply, int expected_horizon);

/// Reads cameras first, then arm and gripper. Any device failure becomes
/// observation_unavailable.
Observation build_observation(devices::DeviceClient& devices, const std::string& prompt, Clock& clock);

}  // namespace vilas::broker
