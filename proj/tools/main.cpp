#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <thread>

#include "signals.hpp"
#include "vilas/broker/adapter.hpp"
#include "vilas/broker/deploy.hpp"
#include "vilas/devices/client.hpp"
#include "vilas/devices/services.hpp"
#include "vilas/error.hpp"
#include "vilas/eval/harness.hpp"
#include "vilas/eval/metrics.hpp"
#include "vilas/image.hpp"
#include "vilas/policyd/server.hpp"
#include "vilas/recorder/episode.hpp"
#include "vilas/recorder/recorder.hpp"
#include "vilas/teleop/bridge.hpp"
#include "vilas/teleop/teleop.hpp"

namespace fs = std::filesystem;
using namespace vilas;

namespace {

// Exit codes beyond 0/1.
constexpr int kExitTruncated = 3;
constexpr int kExitAborted = 4;

struct SimFlags {
  std::string config;
  std::string object;

  void add(CLI::App* app) {
    app->add_option("--config", config, "Simulation config (JSON)")->check(CLI::ExistingFile);
    app->add_option("--object", object, "Object preset")->check(CLI::IsMember({"grape", "cherry"}));
  }

  sim::SimConfig load() const {
    sim::SimConfig c = config.empty() ? sim::SimConfig{} : sim::SimConfig::load(config);
    if (object == "cherry") c.task.object = sim::ObjectSpec::cherry();
    if (object == "grape") c.task.object = sim::ObjectSpec{};
    c.validate();
    return c;
  }
};

struct DeviceFlags {
  std::string arm, gripper, camera;

  void add(CLI::App* app) {
    app->add_option("--arm", arm, "Arm service address (default $VILAS_ARM_ADDR or 127.0.0.1:5601)");
    app->add_option("--gripper", gripper, "Gripper service address (default $VILAS_GRIPPER_ADDR or :5602)");
    app->add_option("--camera", camera, "Camera service address (default $VILAS_CAMERA_ADDR or :5605)");
  }

  devices::DeviceEndpoints endpoints() const {
    auto e = devices::DeviceEndpoints::from_env();
    if (!arm.empty()) e.arm = transport::Address::parse(arm);
    if (!gripper.empty()) e.gripper = transport::Address::parse(gripper);
    if (!camera.empty()) e.camera = transport::Address::parse(camera);
    return e;
  }
};

std::optional<Micros> duration_flag(double seconds) {
  if (seconds <= 0) return std::nullopt;
  return from_seconds(seconds);
}

// ---- devices -------------------------------------------------------------

struct DevicesCmd {
  SimFlags sim;
  std::uint64_t seed = 0;
  int objects = 10;
  std::string bind = "127.0.0.1";
  std::uint16_t arm_port = devices::kArmPort;
  std::uint16_t gripper_port = devices::kGripperPort;
  std::uint16_t camera_port = devices::kCameraPort;

  int run(cli::SignalWatch& signals) {
    RealClock clock;
    devices::DeviceHost::Ports ports{arm_port, gripper_port, camera_port, bind};
    devices::DeviceHost host(sim.load(), clock, seed, objects, ports);
    std::cout << "arm " << host.arm_address().str() << "\n"
              << "gripper " << host.gripper_address().str() << "\n"
              << "camera " << host.camera_address().str() << std::endl;
    signals.wait();
    host.stop();
    return 0;
  }
};

// ---- teleop --------------------------------------------------------------

nlohmann::json view_state(devices::DeviceClient& dev, const nlohmann::json& recorder) {
  const auto w = dev.world_debug();
  nlohmann::json objects = nlohmann::json::array();
  for (const auto& o : w.objects) objects.push_back({{"id", o.id}, {"status", sim::status_name(o.status)}});
  return {{"joints", {{"q", w.joints.q}, {"g", w.joints.g}}}, {"objects", objects}, {"recorder", recorder}};
}

nlohmann::json view_frame(devices::DeviceClient& dev) {
  const auto img = dev.cam_get();
  return {{"base", base64_encode(img.base_png)},
          {"wrist", base64_encode(img.wrist_png)},
          {"timestamp_ms", img.timestamp_ms}};
}

// Recording started and stopped from the bridge, fed by the loop's action tap.
class BridgeRecording {
 public:
  BridgeRecording(Clock& clock, devices::DeviceClient& dev, const teleop::TeleopLoop& loop,
                  recorder::RecordOptions base)
      : clock_(clock), dev_(dev), loop_(loop), base_(std::move(base)) {}

  ~BridgeRecording() { stop(); }

  nlohmann::json start(const std::string& prompt) {
    std::lock_guard lk(mu_);
    if (rec_) return status_locked();
    auto opts = base_;
    opts.prompt = prompt;
    opts.episode_id = recorder::make_episode_id();
    const auto& tap = loop_.action_tap();
    rec_ = std::make_unique<recorder::Recorder>(
        clock_, dev_,
        [&tap]() -> std::optional<teleop::StateVector> {
          if (auto s = tap.get()) return s->value.action;
          return std::nullopt;
        },
        opts);
    thread_ = std::thread([this] {
      auto r = rec_->run();
      std::lock_guard lk(result_mu_);
      last_ = std::move(r);
    });
    return status_locked();
  }

  nlohmann::json stop() {
    std::unique_lock lk(mu_);
    if (!rec_) return status_locked();
    rec_->request_stop();
    if (thread_.joinable()) thread_.join();
    rec_.reset();
    return status_locked();
  }

  nlohmann::json status() {
    std::lock_guard lk(mu_);
    return status_locked();
  }

 private:
  nlohmann::json status_locked() {
    nlohmann::json j{{"active", rec_ != nullptr}};
    if (rec_) {
      j["frames"] = rec_->frames();
      j["episode_id"] = rec_->episode_id();
    }
    std::lock_guard lk(result_mu_);
    if (last_) {
      j["last"] = {{"path", last_->path.string()},
                   {"frames", last_->frame_count},
                   {"truncated", last_->truncated},
                   {"reason", last_->reason}};
    }
    return j;
  }

  Clock& clock_;
  devices::DeviceClient& dev_;
  const teleop::TeleopLoop& loop_;
  recorder::RecordOptions base_;
  std::mutex mu_;
  std::unique_ptr<recorder::Recorder> rec_;
  std::thread thread_;
  std::mutex result_mu_;
  std::optional<recorder::RecordResult> last_;
};

struct TeleopCmd {
  DeviceFlags dev;
  SimFlags sim;
  std::string source;
  double rate = 83.3;
  std::string calib;
  double duration = 0;
  bool loop = false;
  std::string bridge_bind = "127.0.0.1:5604";
  std::string record_out = "episodes";
  double record_rate = 30.0;
  std::int64_t record_max_frames = 1200;
  std::string stats_out;

  int run(cli::SignalWatch& signals) {
    RealClock clock;
    devices::DeviceClient client(dev.endpoints());
    const auto calibration = calib.empty() ? teleop::LeaderCalibration{} : teleop::LeaderCalibration::load(calib);
    calibration.validate();

    teleop::TeleopConfig tc;
    tc.rate_hz = rate;
    tc.duration = duration_flag(duration);

    std::unique_ptr<teleop::LeaderSource> src;
    teleop::PushSource* push = nullptr;
    if (source.rfind("scripted:", 0) == 0) {
      src = std::make_unique<teleop::ScriptedSource>(teleop::Trajectory::load(source.substr(9)), loop);
    } else if (source.rfind("replay:", 0) == 0) {
      src = std::make_unique<teleop::ReplaySource>(teleop::ReplaySource::from_episode(source.substr(7)));
    } else if (source == "bridge") {
      // Start from the leader pose that maps onto the follower's current pose.
      const auto arm = client.arm_state();
      const auto grip = client.grip_state();
      teleop::StateVector follower{};
      for (int i = 0; i < 6; ++i) follower[i] = arm.q[i];
      follower[6] = grip.g;
      teleop::StateVector leader{};
      for (int i = 0; i < sim::kStateDim; ++i)
        leader[i] = calibration.sign[i] * (follower[i] - calibration.offset[i]);
      auto p = std::make_unique<teleop::PushSource>(clock, leader);
      push = p.get();
      src = std::move(p);
    } else {
      throw Error(Errc::invalid_argument, "unknown source '" + source + "'");
    }

    teleop::TeleopLoop teleop_loop(clock, client, *src, calibration, sim.load(), tc);

    std::unique_ptr<BridgeRecording> recording;
    std::unique_ptr<teleop::Bridge> bridge;
    if (push) {
      recorder::RecordOptions ro;
      ro.rate_hz = record_rate;
      ro.max_frames = record_max_frames;
      ro.out_dir = record_out;
      recording = std::make_unique<BridgeRecording>(clock, client, teleop_loop, ro);
      teleop::BridgeHooks hooks;
      auto* rec = recording.get();
      hooks.rec_start = [rec](const std::string& prompt) { return rec->start(prompt); };
      hooks.rec_stop = [rec] { return rec->stop(); };
      hooks.view_state = [&client, rec] { return view_state(client, rec->status()); };
      hooks.view_frame = [&client] { return view_frame(client); };
      teleop::BridgeOptions bo;
      bo.bind = transport::Address::parse(bridge_bind);
      bridge = std::make_unique<teleop::Bridge>(*push, hooks, bo);
      std::cout << "bridge ws://" << bo.bind.host << ":" << bridge->port() << std::endl;
    }

    signals.arm([&] { teleop_loop.request_stop(); });
    const auto stats = teleop_loop.run();
    signals.disarm();
    if (recording) recording->stop();
    if (bridge) bridge->stop();

    const auto j = stats.to_json();
    std::cout << j.dump() << std::endl;
    if (!stats_out.empty()) std::ofstream(stats_out) << j.dump(2) << "\n";
    return stats.failed_commands > 0 ? 1 : 0;
  }
};

// ---- record --------------------------------------------------------------

struct RecordCmd {
  DeviceFlags dev;
  std::string prompt;
  double rate = 30.0;
  std::int64_t max_frames = 1200;
  std::string out = "episodes";
  std::string episode_id;
  double duration = 0;

  int run(cli::SignalWatch& signals) {
    RealClock clock;
    devices::DeviceClient client(dev.endpoints());
    recorder::RecordOptions ro;
    ro.prompt = prompt;
    ro.rate_hz = rate;
    ro.max_frames = max_frames;
    ro.out_dir = out;
    ro.episode_id = episode_id;
    ro.duration = duration_flag(duration);
    recorder::Recorder rec(clock, client, nullptr, ro);
    signals.arm([&] { rec.request_stop(); });
    const auto r = rec.run();
    signals.disarm();
    std::cout << fmt::format("{} {} frames{}", r.path.string(), r.frame_count,
                             r.truncated ? " (truncated: " + r.reason + ")" : "")
              << std::endl;
    return r.truncated ? kExitTruncated : 0;
  }
};

// ---- deploy --------------------------------------------------------------

struct DeployCmd {
  DeviceFlags dev;
  std::string protocol = "ws";
  std::string policy;
  int horizon = 50;
  double rate = 20.0;
  std::string prompt = "pick up the grapes and place them in the box";
  std::string log;
  double duration = 0;
  double timeout_ms = 5000;
  std::optional<std::uint64_t> seed;

  int run(cli::SignalWatch& signals) {
    RealClock clock;
    devices::DeviceClient client(dev.endpoints());
    const auto proto = broker::parse_protocol(protocol);
    if (policy.empty()) {
      policy = proto == broker::Protocol::ws ? fmt::format("ws://127.0.0.1:{}", policyd::kWsPort)
                                             : fmt::format("127.0.0.1:{}", policyd::kMqPort);
    }
    auto adapter = broker::make_adapter(proto, transport::Address::parse(policy));
    const Micros timeout(static_cast<std::int64_t>(timeout_ms * 1000));
    if (seed) adapter->reset(*seed, timeout);

    broker::DeployConfig dc;
    dc.control_rate_hz = rate;
    dc.horizon = horizon;
    dc.prompt = prompt;
    dc.infer_timeout = timeout;
    dc.duration = duration_flag(duration);
    dc.log_path = log;
    broker::DeployLoop loop(clock, client, *adapter, dc);
    signals.arm([&] { loop.request_stop(); });
    const auto r = loop.run();
    signals.disarm();

    const auto lat = r.latencies_ms();
    std::cout << fmt::format("{} ticks, {} inferences, {} retries, {} gripper clamps", r.ticks,
                             r.inferences.size(), r.retries, r.clamped_gripper)
              << std::endl;
    if (!lat.empty()) {
      const auto s = eval::latency_stats(lat, horizon);
      std::cout << fmt::format("latency mean {} per-step {}", eval::format_ms(s.mean_ms),
                               eval::format_ms(s.per_step_ms))
                << std::endl;
    }
    if (r.aborted) {
      spdlog::error("deploy aborted: {}", r.abort_reason);
      return kExitAborted;
    }
    return 0;
  }
};

// ---- policyd -------------------------------------------------------------

struct PolicydCmd {
  DeviceFlags dev;
  SimFlags sim;
  std::string kind = "oracle";
  int horizon = 50;
  double rate = 20.0;
  std::vector<std::string> protocols{"ws", "mq"};
  std::string mq_bind = fmt::format("127.0.0.1:{}", policyd::kMqPort);
  std::string ws_bind = fmt::format("127.0.0.1:{}", policyd::kWsPort);
  double latency_mean = 0;
  double latency_std = 0;
  std::optional<std::uint64_t> latency_seed;
  std::uint64_t seed = 0;
  std::string latency_log;

  int run(cli::SignalWatch& signals) {
    RealClock clock;
    policyd::ServerOptions so;
    so.spec = policyd::PolicySpec::parse(kind);
    so.horizon = horizon;
    so.control_rate_hz = rate;
    so.latency = {latency_mean, latency_std, latency_seed.value_or(seed)};
    so.seed = seed;
    so.config = sim.load();
    so.latency_log = latency_log;
    so.mq_bind.reset();
    so.ws_bind.reset();
    for (const auto& p : protocols) {
      const auto proto = broker::parse_protocol(p);
      if (proto == broker::Protocol::mq) so.mq_bind = transport::Address::parse(mq_bind);
      if (proto == broker::Protocol::ws) so.ws_bind = transport::Address::parse(ws_bind);
    }

    std::unique_ptr<devices::DeviceClient> world_client;
    if (so.spec.kind == "oracle") {
      world_client = std::make_unique<devices::DeviceClient>(dev.endpoints());
      auto* wc = world_client.get();
      so.world = [wc] { return wc->world_debug(); };
    }

    policyd::PolicyServer server(clock, so);
    if (auto a = server.mq_address()) std::cout << "mq " << a->str() << "\n";
    if (auto a = server.ws_address()) std::cout << "ws ws://" << a->str() << "\n";
    std::cout.flush();
    signals.wait();
    server.stop();
    spdlog::info("policyd served {} requests", server.served());
    return 0;
  }
};

// ---- eval ----------------------------------------------------------------

struct EvalCmd {
  SimFlags sim;
  std::string policy_kind = "oracle";
  int trials = 50;
  std::uint64_t seed = 7;
  std::string protocol = "ws";
  int horizon = 50;
  double rate = 20.0;
  std::string out = "report";
  int parallel = 1;
  bool any2 = false;
  bool realtime = false;
  double latency_mean = 0;
  double latency_std = 0;
  int objects = 10;
  int attempts = 3;
  double attempt_timeout = 30.0;
  std::string runlogs;

  int run(cli::SignalWatch&) {
    eval::EvalConfig cfg;
    cfg.policy = policyd::PolicySpec::parse(policy_kind);
    cfg.trials = trials;
    cfg.base_seed = seed;
    cfg.protocol = broker::parse_protocol(protocol);
    cfg.horizon = horizon;
    cfg.control_rate_hz = rate;
    cfg.latency = {latency_mean, latency_std, seed};
    cfg.n_objects = objects;
    cfg.attempts = attempts;
    cfg.attempt_timeout = from_seconds(attempt_timeout);
    cfg.accelerated = !realtime;
    cfg.parallel = parallel;
    cfg.config = sim.load();
    cfg.runlog_dir = runlogs;

    const auto result = eval::run_trials(cfg, [](const eval::TrialRecord& t) {
      std::string marks;
      for (bool b : t.attempt_outcomes) marks += b ? 'T' : 'F';
      spdlog::info("trial {} seed {} [{}]{}", t.trial_id, t.seed, marks, t.aborted ? " aborted" : "");
    });

    eval::Report report;
    report.label = cfg.policy.str();
    report.generated_at = recorder::utc_timestamp();
    report.records = result.records;
    if (!result.latencies_ms.empty()) report.latency = eval::latency_stats(result.latencies_ms, horizon);
    report.rates = eval::success_rates(result.records, any2);
    report.settings = {{"trials", trials},   {"base_seed", seed},     {"protocol", protocol},
                       {"horizon", horizon}, {"control_rate_hz", rate}, {"n_objects", objects},
                       {"attempts", attempts}, {"attempt_timeout_s", attempt_timeout},
                       {"latency_mean_ms", latency_mean}, {"latency_std_ms", latency_std},
                       {"accelerated", !realtime}, {"object", cfg.config.task.object.name}};
    eval::write_report(report, out);
    std::cout << eval::report_table(report);
    return 0;
  }
};

// ---- stats ---------------------------------------------------------------

struct StatsCmd {
  std::string runlog;
  int horizon = 50;
  bool json = false;

  int run(cli::SignalWatch&) {
    const auto s = eval::latency_stats(broker::read_latencies(runlog), horizon);
    if (json) {
      std::cout << eval::to_json(s).dump(2) << std::endl;
      return 0;
    }
    std::cout << fmt::format(
        "samples  {}\nmean     {}\nmedian   {}\nstd      {}\np95      {}\nhorizon  {}\nper-step {}\n", s.samples,
        eval::format_ms(s.mean_ms), eval::format_ms(s.median_ms), eval::format_ms(s.std_ms),
        eval::format_ms(s.p95_ms), s.horizon, eval::format_ms(s.per_step_ms));
    return 0;
  }
};

// ---- export / verify -----------------------------------------------------

std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> eps;
  for (const auto& in : inputs) {
    if (fs::exists(fs::path(in) / "meta.json")) {
      eps.emplace_back(in);
    } else {
      auto found = recorder::find_episodes(in);
      eps.insert(eps.end(), found.begin(), found.end());
    }
  }
  return eps;
}

struct ExportCmd {
  std::vector<std::string> inputs;
  std::string out;
  std::string schema = "table";
  bool allow_mixed = false;

  int run(cli::SignalWatch&) {
    const auto eps = expand_inputs(inputs);
    if (eps.empty()) throw Error(Errc::invalid_argument, "no episodes found");
    const auto r = recorder::export_dataset(eps, out, recorder::parse_schema(schema), allow_mixed);
    std::cout << fmt::format("exported {} episodes to {}", r.outputs.size(), out) << std::endl;
    return 0;
  }
};

struct VerifyCmd {
  std::string root;

  int run(cli::SignalWatch&) {
    const auto r = recorder::verify_corpus(root);
    for (const auto& e : r.errors) std::cout << "error: " << e << "\n";
    std::cout << fmt::format("{} episodes, {} frames, {} errors, {:.2f} s", r.episodes, r.frames,
                             r.errors.size(), r.seconds)
              << std::endl;
    return r.errors.empty() ? 0 : 1;
  }
};

}  // namespace

int main(int argc, char** argv) {
  cli::SignalWatch signals;

  CLI::App app{"vilas: simulated teleoperation, recording and policy deployment"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off");

  DevicesCmd devices_cmd;
  auto* c = app.add_subcommand("devices", "Run the arm, gripper and camera services over one simulated world");
  devices_cmd.sim.add(c);
  c->add_option("--seed", devices_cmd.seed, "Object scatter seed");
  c->add_option("--objects", devices_cmd.objects, "Objects on the table");
  c->add_option("--bind", devices_cmd.bind, "Listen host");
  c->add_option("--arm-port", devices_cmd.arm_port);
  c->add_option("--gripper-port", devices_cmd.gripper_port);
  c->add_option("--camera-port", devices_cmd.camera_port);

  TeleopCmd teleop_cmd;
  auto* t = app.add_subcommand("teleop", "Forward a leader source to the follower at a fixed rate");
  teleop_cmd.dev.add(t);
  teleop_cmd.sim.add(t);
  t->add_option("--source", teleop_cmd.source, "scripted:<file> | bridge | replay:<episode>")->required();
  t->add_option("--rate", teleop_cmd.rate, "Command rate in Hz");
  t->add_option("--calib", teleop_cmd.calib, "Leader calibration file")->check(CLI::ExistingFile);
  t->add_option("--duration", teleop_cmd.duration, "Stop after this many seconds");
  t->add_flag("--loop", teleop_cmd.loop, "Loop a scripted trajectory");
  t->add_option("--bridge-bind", teleop_cmd.bridge_bind, "Bridge WebSocket listen address");
  t->add_option("--record-out", teleop_cmd.record_out, "Episode directory for bridge recordings");
  t->add_option("--record-rate", teleop_cmd.record_rate);
  t->add_option("--record-max-frames", teleop_cmd.record_max_frames);
  t->add_option("--stats-out", teleop_cmd.stats_out, "Write loop statistics as JSON");

  RecordCmd record_cmd;
  auto* r = app.add_subcommand("record", "Record one episode from the device services");
  record_cmd.dev.add(r);
  r->add_option("--prompt", record_cmd.prompt, "Task prompt")->required();
  r->add_option("--rate", record_cmd.rate, "Record rate in Hz");
  r->add_option("--max-frames", record_cmd.max_frames);
  r->add_option("--out", record_cmd.out, "Output directory");
  r->add_option("--episode-id", record_cmd.episode_id);
  r->add_option("--duration", record_cmd.duration, "Stop after this many seconds");

  DeployCmd deploy_cmd;
  auto* d = app.add_subcommand("deploy", "Run a policy against the devices with action chunking");
  deploy_cmd.dev.add(d);
  d->add_option("--protocol", deploy_cmd.protocol)->check(CLI::IsMember({"ws", "mq"}));
  d->add_option("--policy", deploy_cmd.policy, "Policy server address");
  d->add_option("--horizon", deploy_cmd.horizon, "Action chunk length");
  d->add_option("--rate", deploy_cmd.rate, "Control rate in Hz");
  d->add_option("--prompt", deploy_cmd.prompt);
  d->add_option("--log", deploy_cmd.log, "Run log (JSON lines)");
  d->add_option("--duration", deploy_cmd.duration, "Stop after this many seconds");
  d->add_option("--timeout-ms", deploy_cmd.timeout_ms, "Per-inference timeout");
  d->add_option("--seed", deploy_cmd.seed, "Send policy.reset with this seed first");

  PolicydCmd policyd_cmd;
  auto* p = app.add_subcommand("policyd", "Serve a reference policy over ws and/or mq");
  policyd_cmd.dev.add(p);
  policyd_cmd.sim.add(p);
  p->add_option("--kind", policyd_cmd.kind, "oracle | random | zeros | replay:<episode>");
  p->add_option("--horizon", policyd_cmd.horizon);
  p->add_option("--rate", policyd_cmd.rate, "Control rate the chunks are meant for");
  p->add_option("--protocols", policyd_cmd.protocols, "ws,mq")->delimiter(',');
  p->add_option("--mq-bind", policyd_cmd.mq_bind);
  p->add_option("--ws-bind", policyd_cmd.ws_bind);
  p->add_option("--latency-mean", policyd_cmd.latency_mean, "Injected latency mean (ms)");
  p->add_option("--latency-std", policyd_cmd.latency_std, "Injected latency std (ms)");
  p->add_option("--latency-seed", policyd_cmd.latency_seed);
  p->add_option("--latency-log", policyd_cmd.latency_log, "Append injected samples (JSON lines)");
  p->add_option("--seed", policyd_cmd.seed);

  EvalCmd eval_cmd;
  auto* e = app.add_subcommand("eval", "Run isolated trials and write a success/latency report");
  eval_cmd.sim.add(e);
  e->add_option("--policy-kind", eval_cmd.policy_kind, "oracle | random | zeros | replay:<episode>");
  e->add_option("--trials", eval_cmd.trials);
  e->add_option("--seed", eval_cmd.seed, "Base seed; trial i uses seed + i");
  e->add_option("--protocol", eval_cmd.protocol)->check(CLI::IsMember({"ws", "mq"}));
  e->add_option("--horizon", eval_cmd.horizon);
  e->add_option("--rate", eval_cmd.rate);
  e->add_option("--out", eval_cmd.out, "Report directory");
  e->add_option("--parallel", eval_cmd.parallel, "Worker threads")->check(CLI::PositiveNumber);
  e->add_flag("--multi-any2", eval_cmd.any2, "Also report the any-two-of-three multi rate");
  e->add_flag("--realtime", eval_cmd.realtime, "Run on the wall clock instead of simulated time");
  e->add_option("--latency-mean", eval_cmd.latency_mean);
  e->add_option("--latency-std", eval_cmd.latency_std);
  e->add_option("--objects", eval_cmd.objects);
  e->add_option("--attempts", eval_cmd.attempts);
  e->add_option("--attempt-timeout", eval_cmd.attempt_timeout, "Seconds per attempt");
  e->add_option("--runlogs", eval_cmd.runlogs, "Directory for per-trial deploy logs");

  StatsCmd stats_cmd;
  auto* s = app.add_subcommand("stats", "Latency statistics of a deploy run log");
  s->add_option("runlog", stats_cmd.runlog)->required()->check(CLI::ExistingFile);
  s->add_option("--horizon", stats_cmd.horizon)->required();
  s->add_flag("--json", stats_cmd.json);

  ExportCmd export_cmd;
  auto* x = app.add_subcommand("export", "Export episodes as a canonical copy or a flat table");
  x->add_option("inputs", export_cmd.inputs, "Episode directories or corpus roots")->required();
  x->add_option("--out", export_cmd.out)->required();
  x->add_option("--schema", export_cmd.schema)->check(CLI::IsMember({"canonical", "table"}));
  x->add_flag("--allow-mixed", export_cmd.allow_mixed, "Permit episodes with different record rates");

  VerifyCmd verify_cmd;
  auto* v = app.add_subcommand("verify", "Check every episode under a directory");
  v->add_option("root", verify_cmd.root)->required()->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);
  // stdout carries addresses and results; logs go to stderr.
  spdlog::set_default_logger(spdlog::stderr_color_mt("vilas"));
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*c) return devices_cmd.run(signals);
    if (*t) return teleop_cmd.run(signals);
    if (*r) return record_cmd.run(signals);
    if (*d) return deploy_cmd.run(signals);
    if (*p) return policyd_cmd.run(signals);
    if (*e) return eval_cmd.run(signals);
    if (*s) return stats_cmd.run(signals);
    if (*x) return export_cmd.run(signals);
    if (*v) return verify_cmd.run(signals);
  } catch (const Error& err) {
    spdlog::error("{}: {}", errc_name(err.code()), err.what());
    return 1;
  } catch (const std::exception& err) {
    spdlog::error("{}", err.what());
    return 1;
  }
  return 1;
}
