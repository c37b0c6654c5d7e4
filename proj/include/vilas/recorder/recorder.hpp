#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "vilas/clock.hpp"
#include "vilas/devices/client.hpp"
#include "vilas/recorder/episode.hpp"

namespace vilas::recorder {

struct RecordOptions {
  std::string prompt;
  double rate_hz = 30.0;
  std::int64_t max_frames = 1200;
  fs::path out_dir = ".";
  std::string episode_id;  // generated when empty
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();
  std::optional<Micros> duration;
};

/// Returns the latest commanded action, if any.
using ActionTap = std::function<std::optional<StateVector>()>;

struct RecordResult {
  fs::path path;
  std::int64_t frame_count = 0;
  bool truncated = false;
  std::string reason;
};

/// Serializes frames to a temporary directory on its own thread, then
/// publishes the episode with a rename once meta.json is written.
class EpisodeWriter {
 public:
  EpisodeWriter(const fs::path& out_dir, const std::string& episode_id);
  ~EpisodeWriter();

  struct Item {
    FrameRecord record;
    std::string base_png;
    std::string wrist_png;
  };

  void push(Item item);
  /// Drains the queue, writes meta.json and renames into place.
  fs::path finish(EpisodeMeta meta);
  /// Stops the writer and removes the temporary directory.
  void abort();
  /// Non-empty after a failed write.
  std::string error() const;

  const fs::path& temp_dir() const { return temp_; }

 private:
  void loop();

  fs::path final_;
  fs::path temp_;
  std::ofstream states_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Item> queue_;
  bool closing_ = false;
  std::string error_;
  std::thread thread_;
};

/// Samples cameras, follower state and the commanded action at a fixed rate
/// and writes an episode. Camera first, then arm and gripper, so a frame's
/// image is never newer than its state sample.
class Recorder {
 public:
  /// Without a tap the action is taken from the services' current targets.
  Recorder(Clock& clock, devices::DeviceClient& devices, ActionTap tap, RecordOptions options);

  RecordResult run();
  void request_stop() { stop_ = true; }
  std::int64_t frames() const { return frames_; }
  const std::string& episode_id() const { return options_.episode_id; }

 private:
  Clock& clock_;
  devices::DeviceClient& devices_;
  ActionTap tap_;
  RecordOptions options_;
  std::atomic<bool> stop_{false};
  std::atomic<std::int64_t> frames_{0};
};

std::string make_episode_id();
std::string utc_timestamp();

}  // namespace vilas::recorder
