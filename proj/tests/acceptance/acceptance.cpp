// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// fails. Expected values come from tests/oracles/frozen.json, which
// tests/oracles/derived_values.py regenerates and checks.

#include <fmt/format.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <iostream>
#include <random>
#include <thread>

#include "support/generators.hpp"
#include "support/process.hpp"
#include "vilas/broker/adapter.hpp"
#include "vilas/broker/deploy.hpp"
#include "vilas/devices/services.hpp"
#include "vilas/eval/harness.hpp"
#include "vilas/eval/metrics.hpp"
#include "vilas/policyd/server.hpp"
#include "vilas/recorder/episode.hpp"
#include "vilas/recorder/recorder.hpp"
#include "vilas/teleop/teleop.hpp"

namespace fs = std::filesystem;
using namespace vilas;
using nlohmann::json;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += (ok ? "" : "!") + what;
  }
};

json frozen() {
  std::ifstream in(fs::path(VILAS_SOURCE_DIR) / "tests/oracles/frozen.json");
  return json::parse(in);
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / fmt::format("vilas_accept_{}_{}", ::getpid(), name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string run_python(const std::string& args) {
  const std::string cmd = "python3 " + args;
  std::string out;
  if (FILE* f = ::popen(cmd.c_str(), "r")) {
    char buf[512];
    while (std::fgets(buf, sizeof buf, f)) out += buf;
    ::pclose(f);
  }
  return out;
}

policyd::ServerOptions zeros_server(int horizon, policyd::LatencyProfile latency = {}) {
  policyd::ServerOptions so;
  so.spec = policyd::PolicySpec::parse("zeros");
  so.horizon = horizon;
  so.latency = latency;
  so.mq_bind = transport::Address{"127.0.0.1", 0};
  so.ws_bind = transport::Address{"127.0.0.1", 0};
  return so;
}

// ---- chunk scheduling ----------------------------------------------------

struct ScheduleRun {
  std::vector<Micros> calls;
};

ScheduleRun deploy_zeros(Clock& clock, int horizon, double seconds) {
  devices::DeviceHost host(sim::SimConfig{}, clock, 1, 10, devices::DeviceHost::Ports::ephemeral());
  devices::DeviceClient dev({host.arm_address(), host.gripper_address(), host.camera_address()});
  policyd::PolicyServer server(clock, zeros_server(horizon));
  broker::MqAdapter mq(*server.mq_address());
  broker::DeployConfig dc;
  dc.horizon = horizon;
  dc.duration = from_seconds(seconds);
  broker::DeployLoop loop(clock, dev, mq, dc);
  return {loop.run().call_times()};
}

void check_schedule(Verdict& v, const std::string& label, const ScheduleRun& r, double spacing_s,
                    std::optional<int> calls) {
  const double tick = 0.05;
  double worst = 0;
  for (std::size_t i = 1; i < r.calls.size(); ++i)
    worst = std::max(worst, std::abs(to_seconds(r.calls[i] - r.calls[i - 1]) - spacing_s));
  v.require(r.calls.size() >= 2 && worst <= tick,
            fmt::format("{} spacing {:.1f} s max dev {:.4f} s", label, spacing_s, worst));
  if (calls) {
    const int n = static_cast<int>(r.calls.size());
    v.require(std::abs(n - *calls) <= 1, fmt::format("{} {} calls (want {}±1)", label, n, *calls));
  }
}

// ---- teleop --------------------------------------------------------------

teleop::TeleopStats teleop_realtime(double seconds) {
  RealClock clock;
  devices::DeviceHost host(sim::SimConfig{}, clock, 2, 10, devices::DeviceHost::Ports::ephemeral());
  devices::DeviceClient dev({host.arm_address(), host.gripper_address(), host.camera_address()});
  teleop::ScriptedSource src(
      teleop::Trajectory::load((fs::path(VILAS_SOURCE_DIR) / "data/trajectories/sweep_40s.json").string()), true);
  teleop::TeleopConfig tc;
  tc.duration = from_seconds(seconds);
  teleop::TeleopLoop loop(clock, dev, src, {}, sim::SimConfig{}, tc);
  return loop.run();
}

Verdict calibration_property() {
  Verdict v;
  std::mt19937_64 rng(20261016);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.001);
  int apply_bad = 0, recover_bad = 0;
  const int n = 1000;
  for (int k = 0; k < n; ++k) {
    teleop::LeaderCalibration c;
    for (int i = 0; i < sim::kStateDim; ++i) {
      c.sign[i] = (rng() & 1) ? 1 : -1;
      c.offset[i] = u(rng);
    }
    teleop::StateVector leader{};
    for (auto& x : leader) x = u(rng);
    const auto f = c.apply(leader);
    for (int i = 0; i < sim::kStateDim; ++i)
      if (f[i] != c.sign[i] * leader[i] + c.offset[i]) ++apply_bad;

    // Leader samples taken at a reference pose give back the offsets.
    teleop::StateVector reference{};
    for (auto& x : reference) x = u(rng);
    std::vector<teleop::StateVector> samples(20);
    for (auto& s : samples)
      for (int i = 0; i < sim::kStateDim; ++i) s[i] = c.sign[i] * (reference[i] - c.offset[i]) + noise(rng);
    const auto est = teleop::calibrate(samples, reference, c.sign);
    for (int i = 0; i < sim::kStateDim; ++i)
      if (std::abs(est.offset[i] - c.offset[i]) > 0.002) ++recover_bad;
  }
  v.require(apply_bad == 0, fmt::format("apply exact on {} random maps", n));
  v.require(recover_bad == 0, fmt::format("offsets recovered within 2 mrad ({} misses)", recover_bad));
  return v;
}

// ---- criteria --------------------------------------------------------------

Verdict per_step_cost(const json& fz) {
  Verdict v;
  for (const auto& [key, want] : fz.at("per_step_display_ms").items()) {
    const double mean = std::stod(key.substr(0, key.find('/')));
    const int horizon = std::stoi(key.substr(key.find('/') + 1));
    const auto s = eval::latency_stats(std::vector<double>(10, mean), horizon);
    const auto shown = eval::format_ms(s.per_step_ms);
    v.require(shown == want.get<std::string>() + " ms" && s.per_step_ms * horizon == s.mean_ms,
              fmt::format("{} -> {}", key, shown));
  }
  return v;
}

Verdict chunk_schedule_accelerated(const json& fz) {
  Verdict v;
  for (int h : {50, 16}) {
    VirtualClock clock;
    const auto r = deploy_zeros(clock, h, 60.0);
    const auto& want = fz.at("chunk_schedule").at(std::to_string(h));
    check_schedule(v, fmt::format("accel H{}", h), r, want.at("spacing_s"),
                   h == 50 ? std::optional<int>(want.at("calls_60s").get<int>()) : std::nullopt);
  }
  return v;
}

Verdict latency_fidelity() {
  Verdict v;
  const auto dir = scratch("latency");
  const auto injected_log = dir / "injected.jsonl";
  VirtualClock clock;
  devices::DeviceHost host(sim::SimConfig{}, clock, 4, 10, devices::DeviceHost::Ports::ephemeral());
  devices::DeviceClient dev({host.arm_address(), host.gripper_address(), host.camera_address()});
  auto so = zeros_server(16, {73.8, 0.4, 99});
  so.ws_bind.reset();
  so.latency_log = injected_log.string();
  std::vector<double> measured;
  {
    policyd::PolicyServer server(clock, so);
    broker::MqAdapter mq(*server.mq_address());
    broker::DeployConfig dc;
    dc.horizon = 16;
    dc.log_path = (dir / "run.jsonl").string();
    broker::DeployLoop loop(clock, dev, mq, dc);
    loop.on_tick([](const broker::TickEvent& t) { return t.seq < 1000 || t.k < 15; });
    loop.run();
  }
  measured = broker::read_latencies((dir / "run.jsonl").string());
  const auto m = eval::latency_stats(measured, 16);
  const auto oracle = json::parse(run_python(
      fmt::format("\"{}\" \"{}\"", (fs::path(VILAS_SOURCE_DIR) / "tests/oracles/latency_oracle.py").string(),
                  injected_log.string())));
  v.require(measured.size() >= 1000 && oracle.at("n").get<std::size_t>() == measured.size(),
            fmt::format("{} calls", measured.size()));
  const double dmean = m.mean_ms - oracle.at("mean_ms").get<double>();
  const double dp95 = m.p95_ms - oracle.at("p95_ms").get<double>();
  v.require(std::abs(dmean) <= 0.1, fmt::format("mean {:.4f} vs {:.4f} ms", m.mean_ms, oracle.at("mean_ms").get<double>()));
  v.require(std::abs(dp95) <= 0.2, fmt::format("p95 {:.4f} vs {:.4f} ms", m.p95_ms, oracle.at("p95_ms").get<double>()));
  fs::remove_all(dir);
  return v;
}

Verdict end_to_end_trials() {
  Verdict v;
  eval::EvalConfig cfg;
  cfg.trials = 50;
  cfg.base_seed = 7;
  cfg.protocol = broker::Protocol::ws;
  const auto ws = eval::run_trials(cfg);
  cfg.protocol = broker::Protocol::mq;
  const auto mq = eval::run_trials(cfg);
  const auto rw = eval::success_rates(ws.records);
  const auto rm = eval::success_rates(mq.records);
  v.require(rw.single >= 0.95 && rw.multi >= 0.95,
            fmt::format("oracle ws single {:.0f}% multi {:.0f}%", rw.single * 100, rw.multi * 100));
  v.require(rm.single >= 0.95 && rm.multi >= 0.95,
            fmt::format("oracle mq single {:.0f}% multi {:.0f}%", rm.single * 100, rm.multi * 100));
  bool same = ws.records.size() == mq.records.size();
  for (std::size_t i = 0; same && i < ws.records.size(); ++i)
    same = ws.records[i].attempt_outcomes == mq.records[i].attempt_outcomes &&
           ws.records[i].sim_time_s == mq.records[i].sim_time_s;
  v.require(same, "ws and mq outcomes identical per seed");

  cfg.policy = policyd::PolicySpec::parse("random");
  cfg.protocol = broker::Protocol::ws;
  const auto rnd = eval::success_rates(eval::run_trials(cfg).records);
  v.require(rnd.single <= 0.05, fmt::format("random single {:.0f}%", rnd.single * 100));
  return v;
}

Verdict metric_fixture(const json& fz) {
  Verdict v;
  std::vector<eval::TrialRecord> records;
  auto add = [&](int n, std::vector<bool> o) {
    for (int i = 0; i < n; ++i) {
      eval::TrialRecord r;
      r.trial_id = static_cast<int>(records.size());
      r.attempt_outcomes = o;
      r.grasp_count = static_cast<int>(std::count(o.begin(), o.end(), true));
      records.push_back(r);
    }
  };
  add(29, {true, true, true});
  add(6, {true, false, true});
  add(6, {false, false, true});
  add(9, {false, false, false});
  const auto r = eval::success_rates(records, true);
  const auto& f = fz.at("fixture");
  v.require(r.single == f.at("single").get<double>(), fmt::format("single {:.0f}%", r.single * 100));
  v.require(r.multi == f.at("multi").get<double>(), fmt::format("multi {:.0f}%", r.multi * 100));
  v.require(r.multi_any2 == f.at("multi_any2").get<double>(), fmt::format("any2 {:.0f}%", *r.multi_any2 * 100));
  v.require(eval::multi_success({true, false, true}) == f.at("t_f_t_multi").get<bool>(), "[T,F,T] multi false");
  return v;
}

Verdict recorder_contract(const json& fz) {
  Verdict v;
  const auto dir = scratch("recorder");
  const std::int64_t want = fz.at("recorder").at("frames_40s_30hz");

  // 40 s scripted session, teleop and recorder sharing one simulated clock.
  VirtualClock clock;
  devices::DeviceHost host(sim::SimConfig{}, clock, 6, 10, devices::DeviceHost::Ports::ephemeral());
  devices::DeviceEndpoints ep{host.arm_address(), host.gripper_address(), host.camera_address()};
  devices::DeviceClient teleop_dev(ep), rec_dev(ep);
  teleop::ScriptedSource src(
      teleop::Trajectory::load((fs::path(VILAS_SOURCE_DIR) / "data/trajectories/sweep_40s.json").string()));
  teleop::TeleopConfig tc;
  tc.duration = from_seconds(41.0);
  teleop::TeleopLoop loop(clock, teleop_dev, src, {}, sim::SimConfig{}, tc);
  recorder::RecordOptions ro;
  ro.prompt = "pick up the grapes and place them in the box";
  ro.out_dir = dir;
  ro.duration = from_seconds(40.0);
  recorder::Recorder rec(clock, rec_dev, [&] {
    auto s = loop.action_tap().get();
    return s ? std::optional<teleop::StateVector>(s->value.action) : std::nullopt;
  }, ro);
  std::thread t([&] { loop.run(); });
  const auto res = rec.run();
  loop.request_stop();
  t.join();
  v.require(!res.truncated && std::abs(res.frame_count - want) <= 1, fmt::format("{} frames", res.frame_count));

  const auto episode = recorder::load_episode(res.path);
  const auto out = recorder::export_dataset({res.path}, dir / "export", recorder::ExportSchema::table);
  const auto rows = recorder::read_table(out.outputs.at(0));
  bool exact = rows.size() == episode.frames.size();
  for (std::size_t i = 0; exact && i < rows.size(); ++i)
    exact = rows[i].state == episode.frames[i].state && rows[i].action == episode.frames[i].action;
  v.require(exact, "record->load->export states and actions bit-exact");

  // Crash injection: SIGKILL the recorder process mid-episode.
  testing::Process devices({VILAS_CLI, "devices", "--arm-port", "0", "--gripper-port", "0", "--camera-port", "0"});
  auto addr = devices.read_addresses(3, std::chrono::seconds(10));
  const auto crash_dir = dir / "crash";
  int killed = 0, complete = 0;
  for (int ms : {150, 400, 900, 1600, 2500}) {
    testing::Process recp({VILAS_CLI, "record", "--prompt", "crash", "--out", crash_dir.string(), "--arm",
                           addr["arm"], "--gripper", addr["gripper"], "--camera", addr["camera"]});
    std::this_thread::sleep_for(std::chrono::milliseconds(ms));
    recp.signal(SIGKILL);
    killed += recp.wait() == 128 + SIGKILL;
  }
  for (const auto& d : recorder::find_episodes(crash_dir)) {
    try {
      recorder::load_episode(d);
      ++complete;
    } catch (const Error&) {
    }
  }
  const auto report = recorder::verify_corpus(crash_dir);
  v.require(killed == 5 && complete == 0 && report.episodes == 0,
            fmt::format("{} kills, {} loadable-complete", killed, complete));

  // Control: the same command left alone finishes with exit 0 and loads.
  testing::Process ok({VILAS_CLI, "record", "--prompt", "control", "--duration", "1", "--episode-id", "ep_control",
                       "--out", (dir / "control").string(), "--arm", addr["arm"], "--gripper", addr["gripper"],
                       "--camera", addr["camera"]});
  const int rc = ok.wait();
  bool loads = false;
  try {
    loads = recorder::load_episode(dir / "control" / "ep_control").meta.frame_count >= 29;
  } catch (const Error&) {
  }
  v.require(rc == 0 && loads, "uninterrupted run exits 0 and loads");
  devices.signal(SIGINT);
  devices.wait();
  fs::remove_all(dir);
  return v;
}

Verdict transport_properties() {
  Verdict v;
  std::mt19937_64 rng(1234);
  const int n = 10000;
  int mismatches = 0;
  // Streams of 100 envelopes each, cut at random points.
  for (int batch = 0; batch < n / 100; ++batch) {
    std::vector<std::string> sent;
    std::string stream;
    for (int i = 0; i < 100; ++i) {
      sent.push_back(transport::serialize(testing::random_envelope(rng)));
      stream += transport::encode_frame(sent.back());
    }
    transport::FrameDecoder dec;
    std::vector<std::string> got;
    for (const auto& piece : testing::random_chunks(rng, stream)) {
      dec.feed(piece);
      while (auto p = dec.next_payload()) got.push_back(*p);
    }
    if (got.size() != sent.size() || dec.buffered() != 0) {
      mismatches += 100;
      continue;
    }
    for (std::size_t i = 0; i < sent.size(); ++i) {
      mismatches += got[i] != sent[i];
      mismatches += !(transport::parse_envelope(got[i]) == transport::parse_envelope(sent[i]));
    }
  }
  v.require(mismatches == 0, fmt::format("{} envelopes, {} mismatches", n, mismatches));

  RealClock clock;
  devices::DeviceHost host(sim::SimConfig{}, clock, 8, 10, devices::DeviceHost::Ports::ephemeral());
  devices::DeviceClient dev({host.arm_address(), host.gripper_address(), host.camera_address()});
  policyd::PolicyServer server(clock, zeros_server(50));
  broker::MqAdapter mq(*server.mq_address());
  broker::WsAdapter ws(*server.ws_address());
  int identical = 0;
  const int obs_count = 20;
  for (int i = 0; i < obs_count; ++i) {
    const auto obs = broker::build_observation(dev, "pick up the grapes", clock);
    const auto a = mq.infer(obs, 50, Micros(2'000'000));
    const auto b = ws.infer(obs, 50, Micros(2'000'000));
    identical += mq.last_payload() == ws.last_payload() && a.actions == b.actions;
    dev.arm_command(dev.arm_state().q);
  }
  v.require(identical == obs_count, fmt::format("{}/{} observation payloads byte-identical", identical, obs_count));
  return v;
}

void report(int index, const std::string& name, const Verdict& v, double seconds) {
  std::cout << fmt::format("{} [{}] {}: {} ({:.1f} s)", v.pass ? "PASS" : "FAIL", index, name, v.detail, seconds)
            << std::endl;
}

template <typename F>
Verdict timed(F&& f, double& seconds) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = f();
  } catch (const std::exception& e) {
    v.require(false, std::string("exception: ") + e.what());
  }
  seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return v;
}

}  // namespace

int main() {
  const auto fz = frozen();
  bool all = true;
  auto emit = [&](int i, const std::string& name, const Verdict& v, double s) {
    all = all && v.pass;
    report(i, name, v, s);
  };

  // Wall-clock runs first, together and with nothing else competing for the CPU.
  std::cout << "running 60 s wall-clock deploy (H50, H16) and teleop runs..." << std::endl;
  const auto t0 = std::chrono::steady_clock::now();
  auto h50 = std::async(std::launch::async, [] {
    RealClock c;
    return deploy_zeros(c, 50, 60.0);
  });
  auto h16 = std::async(std::launch::async, [] {
    RealClock c;
    return deploy_zeros(c, 16, 60.0);
  });
  auto tele = std::async(std::launch::async, [] { return teleop_realtime(60.0); });
  ScheduleRun r50, r16;
  teleop::TeleopStats ts;
  std::string rt_error;
  try {
    r50 = h50.get();
    r16 = h16.get();
    ts = tele.get();
  } catch (const std::exception& e) {
    rt_error = e.what();
  }
  const double rt_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  double s = 0;
  auto v1 = timed([&] { return per_step_cost(fz); }, s);
  emit(1, "per-step cost", v1, s);

  auto v2 = timed([&] {
    Verdict v;
    if (!rt_error.empty()) v.require(false, "wall-clock run failed: " + rt_error);
    const auto& c = fz.at("chunk_schedule");
    check_schedule(v, "wall H50", r50, c.at("50").at("spacing_s"), c.at("50").at("calls_60s").get<int>());
    check_schedule(v, "wall H16", r16, c.at("16").at("spacing_s"), std::nullopt);
    const auto accel = chunk_schedule_accelerated(fz);
    v.require(accel.pass, accel.detail);
    return v;
  }, s);
  emit(2, "chunk scheduling", v2, s + rt_seconds);

  auto v3 = timed(latency_fidelity, s);
  emit(3, "latency injection fidelity", v3, s);

  auto v4 = timed(end_to_end_trials, s);
  emit(4, "end-to-end oracle/random trials", v4, s);

  auto v5 = timed([&] { return metric_fixture(fz); }, s);
  emit(5, "metric definitions", v5, s);

  auto v6 = timed([&] { return recorder_contract(fz); }, s);
  emit(6, "recorder contract", v6, s);

  auto v7 = timed(transport_properties, s);
  emit(7, "transport properties", v7, s);

  auto v8 = timed([&] {
    Verdict v;
    if (!rt_error.empty()) v.require(false, "wall-clock run failed: " + rt_error);
    const std::int64_t want = fz.at("teleop").at("commands_60s");
    v.require(std::abs(ts.achieved_rate_hz - 83.3) <= 1.0, fmt::format("{:.3f} Hz", ts.achieved_rate_hz));
    v.require(ts.commands >= want - 60 && ts.commands <= want + 60,
              fmt::format("{} commands in [{}, {}]", ts.commands, want - 60, want + 60));
    const auto cal = calibration_property();
    v.require(cal.pass, cal.detail);
    return v;
  }, s);
  emit(8, "teleop loop", v8, s + rt_seconds);

  std::cout << (all ? "ALL PASS" : "SOME CRITERIA FAILED") << std::endl;
  return all ? 0 : 1;
}
