#include "vilas/policyd/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vilas/error.hpp"
#include "vilas/recorder/episode.hpp"
#include "vilas/sim/kinematics.hpp"

namespace vilas::policyd {

namespace {

constexpr double kSpeedFraction = 0.9;
constexpr double kAlignTolerance = 0.003;  // m, xy
constexpr double kHeightTolerance = 0.005;
constexpr double kOpenThreshold = 0.05;
constexpr double kSqueeze = 0.003;  // close to diameter - 3 mm

StateVector flat(const sim::JointVector& q, double g) {
  StateVector s{};
  std::copy(q.begin(), q.end(), s.begin());
  s[sim::kArmDof] = g;
  return s;
}

}  // namespace

PolicySpec PolicySpec::parse(const std::string& text) {
  PolicySpec s;
  const auto colon = text.find(':');
  s.kind = text.substr(0, colon);
  if (colon != std::string::npos) s.episode = text.substr(colon + 1);
  if (s.kind != "zeros" && s.kind != "random" && s.kind != "replay" && s.kind != "oracle") {
    throw Error(Errc::invalid_argument, "unknown policy kind '" + s.kind + "' (oracle|replay:<episode>|random|zeros)");
  }
  if (s.kind == "replay" && s.episode.empty()) {
    throw Error(Errc::invalid_argument, "replay policy needs an episode path: replay:<episode>");
  }
  return s;
}

std::vector<StateVector> ZerosPolicy::act(const Observation&) {
  return std::vector<StateVector>(static_cast<std::size_t>(horizon_), StateVector{});
}

RandomPolicy::RandomPolicy(const PolicyContext& ctx, std::uint64_t seed)
    : horizon_(ctx.horizon), arm_(ctx.config.arm), rng_(seed) {}

std::vector<StateVector> RandomPolicy::act(const Observation& obs) {
  std::uniform_real_distribution<double> step(-0.05, 0.05);
  std::vector<StateVector> rows;
  rows.reserve(static_cast<std::size_t>(horizon_));
  auto js = sim::JointState::from_flat(obs.joints);
  for (int k = 0; k < horizon_; ++k) {
    for (auto& q : js.q) q += step(rng_);
    js.q = arm_.clamp(js.q);
    js.g = std::clamp(js.g + step(rng_), 0.0, 1.0);
    rows.push_back(js.flat());
  }
  return rows;
}

ReplayPolicy::ReplayPolicy(std::vector<StateVector> actions, double record_rate_hz, const PolicyContext& ctx)
    : horizon_(ctx.horizon), actions_(resample(actions, record_rate_hz, ctx.control_rate_hz)) {}

std::vector<StateVector> ReplayPolicy::resample(const std::vector<StateVector>& actions, double record_rate_hz,
                                                double control_rate_hz) {
  if (!(record_rate_hz > 0) || !(control_rate_hz > 0)) throw Error(Errc::invalid_argument, "rates must be positive");
  std::vector<StateVector> out;
  if (actions.empty()) return out;
  // Control step j happens at j / control_rate seconds and holds the newest
  // recorded action at that time.
  const double duration = static_cast<double>(actions.size()) / record_rate_hz;
  const auto n = static_cast<std::size_t>(std::floor(duration * control_rate_hz + 1e-9));
  out.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto i = static_cast<std::size_t>(std::floor(static_cast<double>(j) * record_rate_hz / control_rate_hz + 1e-9));
    out.push_back(actions[std::min(i, actions.size() - 1)]);
  }
  return out;
}

std::vector<StateVector> ReplayPolicy::act(const Observation& obs) {
  std::vector<StateVector> rows;
  rows.reserve(static_cast<std::size_t>(horizon_));
  for (int k = 0; k < horizon_; ++k) {
    if (actions_.empty()) {
      rows.push_back(obs.joints);
    } else {
      rows.push_back(actions_[std::min(cursor_, actions_.size() - 1)]);
      ++cursor_;
    }
  }
  return rows;
}

// Oracle

OraclePolicy::OraclePolicy(const PolicyContext& ctx) : ctx_(ctx) {
  if (!ctx_.world) throw Error(Errc::invalid_argument, "oracle policy needs privileged world access");
}

sim::JointVector OraclePolicy::ik(double x, double y, double z) const {
  auto q = sim::inverse_kinematics_topdown(ctx_.config.arm, {x, y, z});
  if (!q) throw Error(Errc::limit_violation, "oracle: target out of reach");
  return *q;
}

StateVector OraclePolicy::park_pose() const {
  const auto& t = ctx_.config.task;
  const double z = t.table_z + t.travel_height;
  return flat(ik((t.box.x_min + t.box.x_max) / 2, (t.box.y_min + t.box.y_max) / 2, z), 0.0);
}

std::vector<OraclePolicy::Keypose> OraclePolicy::plan(const sim::WorldState& w) const {
  const auto& cfg = ctx_.config;
  const auto& task = cfg.task;
  const double travel_z = task.table_z + task.travel_height;
  const double box_x = (task.box.x_min + task.box.x_max) / 2;
  const double box_y = (task.box.y_min + task.box.y_max) / 2;
  const auto& tcp = w.tcp.position;
  const double g_now = w.target.g;

  std::vector<Keypose> plan;
  auto deliver = [&](double g_closed) {
    plan.push_back({ik(tcp.x, tcp.y, travel_z), g_closed, 0});
    plan.push_back({ik(box_x, box_y, travel_z), g_closed, 0});
    plan.push_back({ik(box_x, box_y, travel_z), 0.0, 6});
  };

  if (w.held_index()) {
    deliver(g_now);
    return plan;
  }
  if (g_now > kOpenThreshold) {
    if (w.joints.g != w.target.g) {
      // Still closing: wait for the grasp to settle, then decide next call.
      const int rows = static_cast<int>(std::ceil((w.target.g - w.joints.g) /
                                                  (cfg.gripper.closure_rate / ctx_.control_rate_hz))) + 1;
      plan.push_back({w.target.q, g_now, std::max(rows, 1)});
      return plan;
    }
    // Closed on nothing: lift, then open.
    plan.push_back({ik(tcp.x, tcp.y, travel_z), g_now, 0});
    plan.push_back({ik(tcp.x, tcp.y, travel_z), 0.0, 4});
    return plan;
  }

  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < w.objects.size(); ++i) {
    const auto& o = w.objects[i];
    if (o.status != sim::ObjectStatus::free) continue;
    const double d = std::hypot(o.center.x - tcp.x, o.center.y - tcp.y);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  if (best < 0) return plan;  // nothing left: caller parks

  const auto& o = w.objects[best];
  const double grasp_z = o.center.z;
  const double g_close = cfg.gripper.closure_for_width(std::max(o.diameter - kSqueeze, 0.0));
  const auto q_grasp = ik(o.center.x, o.center.y, grasp_z);
  const bool aligned = best_d <= kAlignTolerance;
  const bool at_height = std::abs(tcp.z - grasp_z) <= kHeightTolerance;

  if (!aligned) {
    if (tcp.z < travel_z - kHeightTolerance) plan.push_back({ik(tcp.x, tcp.y, travel_z), 0.0, 0});
    plan.push_back({ik(o.center.x, o.center.y, travel_z), 0.0, 0});
  }
  if (!(aligned && at_height)) plan.push_back({q_grasp, 0.0, 0});
  plan.push_back({q_grasp, g_close, 10});
  plan.push_back({ik(o.center.x, o.center.y, travel_z), g_close, 0});
  plan.push_back({ik(box_x, box_y, travel_z), g_close, 0});
  plan.push_back({ik(box_x, box_y, travel_z), 0.0, 6});
  return plan;
}

std::vector<StateVector> OraclePolicy::rollout(const sim::JointState& from, const std::vector<Keypose>& plan) const {
  const auto& arm = ctx_.config.arm;
  const double dt = 1.0 / ctx_.control_rate_hz;
  std::vector<StateVector> rows;
  rows.reserve(static_cast<std::size_t>(ctx_.horizon));
  sim::JointVector q = from.q;
  double g = from.g;
  std::size_t idx = 0;
  int dwell = 0;
  while (static_cast<int>(rows.size()) < ctx_.horizon) {
    if (idx < plan.size()) {
      const auto& kp = plan[idx];
      g = kp.g;
      bool reached = true;
      for (int i = 0; i < sim::kArmDof; ++i) {
        const double step = kSpeedFraction * arm.max_joint_velocity[i] * dt;
        const double delta = kp.q[i] - q[i];
        if (std::abs(delta) <= step) {
          q[i] = kp.q[i];
        } else {
          q[i] += std::copysign(step, delta);
          reached = false;
        }
      }
      rows.push_back(flat(q, g));
      if (reached) {
        if (dwell >= kp.dwell) {
          ++idx;
          dwell = 0;
        } else {
          ++dwell;
        }
      }
    } else {
      rows.push_back(flat(q, g));
    }
  }
  return rows;
}

std::vector<StateVector> OraclePolicy::act(const Observation&) {
  const auto w = ctx_.world();
  const auto p = plan(w);
  if (p.empty()) return std::vector<StateVector>(static_cast<std::size_t>(ctx_.horizon), park_pose());
  sim::JointState from{w.target.q, w.target.g};
  return rollout(from, p);
}

std::unique_ptr<Policy> make_policy(const PolicySpec& spec, const PolicyContext& ctx, std::uint64_t seed) {
  if (ctx.horizon < 1) throw Error(Errc::invalid_argument, "horizon must be at least 1");
  if (spec.kind == "zeros") return std::make_unique<ZerosPolicy>(ctx.horizon);
  if (spec.kind == "random") return std::make_unique<RandomPolicy>(ctx, seed);
  if (spec.kind == "oracle") return std::make_unique<OraclePolicy>(ctx);
  if (spec.kind == "replay") {
    const auto ep = recorder::load_episode(spec.episode, false);
    std::vector<StateVector> actions;
    actions.reserve(ep.frames.size());
    for (const auto& f : ep.frames) actions.push_back(f.action);
    return std::make_unique<ReplayPolicy>(std::move(actions), ep.meta.record_rate_hz, ctx);
  }
  throw Error(Errc::invalid_argument, "unknown policy kind '" + spec.kind + "'");
}

}  // namespace vilas::policyd
