#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "vilas/clock.hpp"
#include "vilas/teleop/teleop.hpp"
#include "vilas/transport/socket.hpp"

namespace vilas::teleop {

inline constexpr std::uint16_t kBridgePort = 5604;

/// Callbacks the bridge uses for recording control and live views. Any of
/// them may be empty; rec.* then replies with an "unavailable" error.
struct BridgeHooks {
  std::function<nlohmann::json(const std::string& prompt)> rec_start;
  std::function<nlohmann::json()> rec_stop;
  std::function<nlohmann::json()> view_state;
  std::function<nlohmann::json()> view_frame;
};

struct BridgeOptions {
  transport::Address bind{"127.0.0.1", kBridgePort};
  Micros state_period{100'000};  // view.state push, 10 Hz
  Micros frame_period{200'000};  // view.frame push, 5 Hz
};

/// WebSocket face of the teleop loop for the operator console. Messages are
/// the JSON envelopes of the device transport without the length prefix.
/// Client to bridge: lead.set, lead.grip, rec.start, rec.stop, ping.
/// Bridge to client: view.state, view.frame, rec.status, error, pong.
///
/// One controller at a time; a second controller is refused with a "busy"
/// error and closed. Connections whose URL carries "observer" (for example
/// ws://host:5604/?role=observer) get the view.* stream only.
class Bridge {
 public:
  Bridge(PushSource& source, BridgeHooks hooks, BridgeOptions options = {});
  ~Bridge();
  Bridge(const Bridge&) = delete;
  Bridge& operator=(const Bridge&) = delete;

  std::uint16_t port() const;
  void stop();

  int sessions() const;
  bool has_controller() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace vilas::teleop
