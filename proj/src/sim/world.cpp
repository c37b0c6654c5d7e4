#include "vilas/sim/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "vilas/error.hpp"

namespace vilas::sim {

using nlohmann::json;

namespace {

// Slack for width comparisons that went through the g <-> width mapping.
constexpr double kWidthEps = 1e-9;

bool all_finite(const JointState& s) {
  return std::all_of(s.q.begin(), s.q.end(), [](double v) { return std::isfinite(v); }) &&
         std::isfinite(s.g);
}

double move_toward(double from, double to, double max_step) {
  const double delta = std::clamp(to - from, -max_step, max_step);
  // Land exactly on the target once within reach.
  return std::abs(to - from) <= max_step ? to : from + delta;
}

}  // namespace

StateVector JointState::flat() const {
  StateVector v{};
  std::copy(q.begin(), q.end(), v.begin());
  v[kArmDof] = g;
  return v;
}

JointState JointState::from_flat(const StateVector& v) {
  JointState s;
  std::copy(v.begin(), v.begin() + kArmDof, s.q.begin());
  s.g = v[kArmDof];
  return s;
}

std::string_view status_name(ObjectStatus s) {
  switch (s) {
    case ObjectStatus::free: return "free";
    case ObjectStatus::held: return "held";
    case ObjectStatus::deposited: return "deposited";
    case ObjectStatus::dropped: return "dropped";
  }
  return "free";
}

std::string_view grasp_result_name(GraspResult r) {
  switch (r) {
    case GraspResult::held: return "held";
    case GraspResult::no_object: return "no-object";
    case GraspResult::out_of_reach: return "out-of-reach";
    case GraspResult::height: return "height";
    case GraspResult::too_wide: return "too-wide";
    case GraspResult::crushed: return "crushed";
  }
  return "no-object";
}

std::optional<int> WorldState::held_index() const {
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (objects[i].status == ObjectStatus::held) return static_cast<int>(i);
  }
  return std::nullopt;
}

int WorldState::count(ObjectStatus s) const {
  return static_cast<int>(std::count_if(objects.begin(), objects.end(),
                                        [s](const WorldObject& o) { return o.status == s; }));
}

double contact_force(const SimConfig& config, double diameter, double width, double force_limit) {
  const auto& gr = config.gripper;
  const double cap = gr.compliant_extension ? gr.force_cap_soft : gr.force_max;
  const double f = gr.contact_stiffness * std::max(0.0, diameter - width);
  return std::clamp(std::min({f, cap, force_limit}), 0.0, gr.force_max);
}

std::pair<double, double> admissible_width(const SimConfig& config, double diameter) {
  const double window =
      config.gripper.compliant_extension ? config.gripper.compliance_window : config.grasp.rigid_window;
  return {diameter - window, diameter + config.grasp.approach_margin};
}

GraspOutcome attempt_grasp(const SimConfig& config, const WorldState& world, double commanded_g) {
  GraspOutcome out;
  out.width = config.gripper.width(std::clamp(commanded_g, 0.0, 1.0));

  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < world.objects.size(); ++i) {
    const auto& o = world.objects[i];
    if (o.status != ObjectStatus::free) continue;
    const double d = std::hypot(o.center.x - world.tcp.position.x, o.center.y - world.tcp.position.y);
    if (d < best) {
      best = d;
      out.object_index = static_cast<int>(i);
    }
  }
  if (out.object_index < 0) return out;

  const auto& obj = world.objects[out.object_index];
  if (best > config.grasp.grasp_radius) {
    out.result = GraspResult::out_of_reach;
    return out;
  }
  const double top = obj.center.z + obj.diameter / 2.0;
  if (std::abs(world.tcp.position.z - top) > config.grasp.grasp_height_band) {
    out.result = GraspResult::height;
    return out;
  }
  const auto [lo, hi] = admissible_width(config, obj.diameter);
  if (out.width > hi + kWidthEps) {
    out.result = GraspResult::too_wide;
    return out;
  }
  if (out.width < lo - kWidthEps) {
    out.result = GraspResult::crushed;
    return out;
  }
  out.result = GraspResult::held;
  out.contact_force = contact_force(config, obj.diameter, out.width, world.grip_force);
  return out;
}

WorldState step(const SimConfig& config, const WorldState& world, const JointState& target, double dt) {
  if (!(dt > 0)) throw Error(Errc::invalid_argument, "step: dt must be positive");
  if (!all_finite(target)) throw Error(Errc::non_finite, "step: non-finite target");

  WorldState w = world;
  w.target.q = config.arm.clamp(target.q);
  w.target.g = std::clamp(target.g, 0.0, 1.0);

  for (int i = 0; i < kArmDof; ++i) {
    w.joints.q[i] = move_toward(w.joints.q[i], w.target.q[i], config.arm.max_joint_velocity[i] * dt);
  }
  w.joints.q = config.arm.clamp(w.joints.q);
  const double prev_g = w.joints.g;
  w.joints.g = move_toward(prev_g, w.target.g, config.gripper.closure_rate * dt);
  w.tcp = forward_kinematics(config.arm, w.joints.q);

  // A grasp is evaluated once, when a closing motion settles on its target.
  const bool settled = w.joints.g == w.target.g && prev_g != w.joints.g;
  const bool closing = w.joints.g > prev_g;

  if (auto held = w.held_index()) {
    auto& obj = w.objects[*held];
    obj.center = w.tcp.position;
    const double width = config.gripper.width(w.joints.g);
    if (width > obj.diameter + config.grasp.approach_margin + kWidthEps) {
      obj.status = w.box_region.contains(w.tcp.position.x, w.tcp.position.y) ? ObjectStatus::deposited
                                                                              : ObjectStatus::dropped;
      obj.center.z = config.task.table_z + obj.diameter / 2.0;
      w.contact_force = 0.0;
    } else if (settled) {
      w.contact_force =
          contact_force(config, obj.diameter, config.gripper.width(w.target.g), w.grip_force);
    }
  } else if (settled && closing) {
    const auto outcome = attempt_grasp(config, w, w.target.g);
    if (outcome.held()) {
      auto& obj = w.objects[outcome.object_index];
      obj.status = ObjectStatus::held;
      obj.center = w.tcp.position;
      w.contact_force = outcome.contact_force;
    } else {
      w.contact_force = 0.0;
    }
  }

  ++w.ticks;
  w.sim_time += dt;
  return w;
}

std::vector<WorldObject> scatter_objects(const SimConfig& config, std::uint64_t seed, int n,
                                         double min_separation) {
  if (n < 0) throw Error(Errc::invalid_argument, "scatter_objects: negative count");
  const auto& task = config.task;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(task.workspace.x_min, task.workspace.x_max);
  std::uniform_real_distribution<double> uy(task.workspace.y_min, task.workspace.y_max);
  std::uniform_real_distribution<double> ud(task.object.diameter_min, task.object.diameter_max);
  const Rect keep_out = task.box.inflated(task.object.diameter_max / 2.0 + 0.01);

  std::vector<WorldObject> objects;
  objects.reserve(static_cast<std::size_t>(n));
  const int max_attempts = 2000 * std::max(n, 1);
  int attempts = 0;
  while (static_cast<int>(objects.size()) < n) {
    if (++attempts > max_attempts) {
      throw Error(Errc::placement_infeasible,
                  "scatter_objects: could not place " + std::to_string(n) + " objects after " +
                      std::to_string(max_attempts) + " attempts");
    }
    const double x = ux(rng);
    const double y = uy(rng);
    const double d = ud(rng);
    if (keep_out.contains(x, y)) continue;
    const bool clear = std::all_of(objects.begin(), objects.end(), [&](const WorldObject& o) {
      return std::hypot(o.center.x - x, o.center.y - y) >= min_separation;
    });
    if (!clear) continue;
    objects.push_back({static_cast<int>(objects.size()), {x, y, task.table_z + d / 2.0}, d, ObjectStatus::free});
  }
  return objects;
}

JointVector home_joints(const SimConfig& config) {
  auto q = inverse_kinematics_topdown(config.arm, config.task.home_tcp);
  if (!q) throw Error(Errc::invalid_argument, "home pose is not reachable");
  return *q;
}

WorldState make_world(const SimConfig& config, std::uint64_t seed, int n_objects) {
  WorldState w;
  w.joints.q = home_joints(config);
  w.joints.g = 0.0;
  w.target = w.joints;
  w.grip_force = config.gripper.force_max;
  w.tcp = forward_kinematics(config.arm, w.joints.q);
  w.objects = scatter_objects(config, seed, n_objects, config.task.min_separation);
  w.box_region = config.task.box;
  w.workspace = config.task.workspace;
  w.rng_seed = seed;
  return w;
}

namespace {

json state_json(const JointState& s) { return {{"q", s.q}, {"g", s.g}}; }

JointState state_from(const json& j) {
  JointState s;
  s.q = j.at("q").get<JointVector>();
  s.g = j.at("g").get<double>();
  return s;
}

ObjectStatus status_from(const std::string& s) {
  if (s == "free") return ObjectStatus::free;
  if (s == "held") return ObjectStatus::held;
  if (s == "deposited") return ObjectStatus::deposited;
  if (s == "dropped") return ObjectStatus::dropped;
  throw Error(Errc::protocol, "unknown object status '" + s + "'");
}

}  // namespace

json world_to_json(const WorldState& w) {
  json objects = json::array();
  for (const auto& o : w.objects) {
    objects.push_back({{"id", o.id},
                       {"center", o.center},
                       {"diameter", o.diameter},
                       {"status", std::string(status_name(o.status))}});
  }
  return {{"joints", state_json(w.joints)},
          {"target", state_json(w.target)},
          {"grip_force", w.grip_force},
          {"grip_speed", w.grip_speed},
          {"contact_force", w.contact_force},
          {"tcp", {{"position", w.tcp.position}, {"yaw", w.tcp.yaw}}},
          {"objects", objects},
          {"box_region", w.box_region},
          {"workspace", w.workspace},
          {"ticks", w.ticks},
          {"sim_time", w.sim_time},
          {"rng_seed", w.rng_seed}};
}

WorldState world_from_json(const json& j) {
  WorldState w;
  w.joints = state_from(j.at("joints"));
  w.target = state_from(j.at("target"));
  w.grip_force = j.at("grip_force").get<double>();
  w.grip_speed = j.at("grip_speed").get<double>();
  w.contact_force = j.at("contact_force").get<double>();
  w.tcp.position = j.at("tcp").at("position").get<Vec3>();
  w.tcp.yaw = j.at("tcp").at("yaw").get<double>();
  for (const auto& o : j.at("objects")) {
    w.objects.push_back({o.at("id").get<int>(), o.at("center").get<Vec3>(), o.at("diameter").get<double>(),
                         status_from(o.at("status").get<std::string>())});
  }
  w.box_region = j.at("box_region").get<Rect>();
  w.workspace = j.at("workspace").get<Rect>();
  w.ticks = j.at("ticks").get<std::int64_t>();
  w.sim_time = j.at("sim_time").get<double>();
  w.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  return w;
}

}  // namespace vilas::sim
