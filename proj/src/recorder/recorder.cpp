#include "vilas/recorder/recorder.hpp"

#include <chrono>
#include <ctime>
#include <random>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "vilas/transport/client.hpp"

namespace vilas::recorder {

using nlohmann::json;

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string make_episode_id() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d_%H%M%S", &tm);
  std::random_device rd;
  return fmt::format("ep_{}_{:04x}", buf, rd() & 0xffff);
}

// Writer

EpisodeWriter::EpisodeWriter(const fs::path& out_dir, const std::string& episode_id)
    : final_(out_dir / episode_id), temp_(out_dir / ("." + episode_id + ".tmp")) {
  if (fs::exists(final_)) throw Error(Errc::io, "episode already exists: " + final_.string());
  std::error_code ec;
  fs::remove_all(temp_, ec);
  fs::create_directories(temp_ / "cam_base");
  fs::create_directories(temp_ / "cam_wrist");
  states_.open(temp_ / "states.jsonl", std::ios::binary);
  if (!states_) throw Error(Errc::io, "cannot create " + (temp_ / "states.jsonl").string());
  thread_ = std::thread([this] { loop(); });
}

EpisodeWriter::~EpisodeWriter() {
  if (thread_.joinable()) abort();
}

void EpisodeWriter::push(Item item) {
  {
    std::lock_guard lk(mu_);
    queue_.push_back(std::move(item));
  }
  cv_.notify_one();
}

std::string EpisodeWriter::error() const {
  std::lock_guard lk(mu_);
  return error_;
}

void EpisodeWriter::loop() {
  for (;;) {
    Item item;
    {
      std::unique_lock lk(mu_);
      cv_.wait(lk, [&] { return closing_ || !queue_.empty(); });
      if (queue_.empty()) return;
      item = std::move(queue_.front());
      queue_.pop_front();
      if (!error_.empty()) continue;
    }
    const auto name = image_name(item.record.index);
    std::string failure;
    for (const auto& [sub, bytes] : {std::pair{"cam_base", &item.base_png}, std::pair{"cam_wrist", &item.wrist_png}}) {
      std::ofstream f(temp_ / sub / name, std::ios::binary);
      f.write(bytes->data(), static_cast<std::streamsize>(bytes->size()));
      if (!f) failure = "write failed: " + (temp_ / sub / name).string();
    }
    states_ << frame_line(item.record) << '\n';
    states_.flush();
    if (!states_) failure = "write failed: " + (temp_ / "states.jsonl").string();
    if (!failure.empty()) {
      std::lock_guard lk(mu_);
      error_ = failure;
    }
  }
}

fs::path EpisodeWriter::finish(EpisodeMeta meta) {
  {
    std::lock_guard lk(mu_);
    closing_ = true;
  }
  cv_.notify_one();
  thread_.join();
  states_.close();
  if (!error_.empty()) {
    abort();
    throw Error(Errc::io, error_);
  }
  {
    std::ofstream m(temp_ / "meta.json");
    m << json(meta).dump(2) << "\n";
    if (!m) {
      abort();
      throw Error(Errc::io, "write failed: meta.json");
    }
  }
  fs::rename(temp_, final_);
  return final_;
}

void EpisodeWriter::abort() {
  {
    std::lock_guard lk(mu_);
    closing_ = true;
    queue_.clear();
  }
  cv_.notify_one();
  if (thread_.joinable()) thread_.join();
  states_.close();
  std::error_code ec;
  fs::remove_all(temp_, ec);
}

// Recorder

Recorder::Recorder(Clock& clock, devices::DeviceClient& devices, ActionTap tap, RecordOptions options)
    : clock_(clock), devices_(devices), tap_(std::move(tap)), options_(std::move(options)) {
  if (!(options_.rate_hz > 0)) throw Error(Errc::invalid_argument, "record rate must be positive");
  if (options_.max_frames < 0) throw Error(Errc::invalid_argument, "max_frames must be non-negative");
  if (options_.episode_id.empty()) options_.episode_id = make_episode_id();
}

RecordResult Recorder::run() {
  ClockParticipant member(clock_);
  fs::create_directories(options_.out_dir);
  EpisodeWriter writer(options_.out_dir, options_.episode_id);

  EpisodeMeta meta;
  meta.episode_id = options_.episode_id;
  meta.prompt = options_.prompt;
  meta.record_rate_hz = options_.rate_hz;
  meta.created_at = utc_timestamp();
  meta.config = options_.config;
  meta.seed = options_.seed;

  const Micros start = clock_.now();
  double last_t = -1;
  std::int64_t k = 0;
  while (!stop_ && frames_ < options_.max_frames) {
    const Micros deadline = start + from_seconds(static_cast<double>(k) / options_.rate_hz);
    if (options_.duration && deadline - start >= *options_.duration) break;
    clock_.sleep_until(deadline);
    if (stop_) break;
    ++k;

    EpisodeWriter::Item item;
    try {
      const auto cam = devices_.cam_get();
      const auto arm = devices_.arm_state();
      const auto grip = devices_.grip_state();
      if (arm.timestamp_ms <= last_t) continue;  // no new state sample since the last frame
      last_t = arm.timestamp_ms;

      auto& r = item.record;
      r.index = frames_;
      r.t_ms = arm.timestamp_ms;
      r.image_t_ms = cam.timestamp_ms;
      for (int i = 0; i < sim::kArmDof; ++i) r.state[i] = arm.q[i];
      r.state[sim::kArmDof] = grip.g;
      std::optional<StateVector> action = tap_ ? tap_() : std::nullopt;
      if (!action) {
        StateVector a{};
        for (int i = 0; i < sim::kArmDof; ++i) a[i] = arm.q_target[i];
        a[sim::kArmDof] = grip.g_target;
        action = a;
      }
      r.action = *action;
      r.prompt = options_.prompt;
      item.base_png = cam.base_png;
      item.wrist_png = cam.wrist_png;
    } catch (const transport::RemoteError& e) {
      meta.truncated = true;
      meta.truncation_reason = e.what();
      break;
    } catch (const Error& e) {
      // Endpoint lost: keep what was captured and mark the episode.
      meta.truncated = true;
      meta.truncation_reason = std::string("endpoint lost: ") + e.what();
      spdlog::warn("recorder: {}", meta.truncation_reason);
      break;
    }
    writer.push(std::move(item));
    ++frames_;
    if (!writer.error().empty()) {
      writer.abort();
      throw Error(Errc::io, "recorder: " + writer.error());
    }
  }

  meta.frame_count = frames_;
  RecordResult result;
  result.path = writer.finish(meta);
  result.frame_count = frames_;
  result.truncated = meta.truncated;
  result.reason = meta.truncation_reason;
  return result;
}

}  // namespace vilas::recorder
