#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vilas/sim/kinematics.hpp"
#include "vilas/sim/model.hpp"

namespace vilas::sim {

/// Six arm joints (radians) plus normalized gripper closure.
struct JointState {
  JointVector q{};
  double g = 0.0;

  StateVector flat() const;
  static JointState from_flat(const StateVector& v);
  friend bool operator==(const JointState&, const JointState&) = default;
};

enum class ObjectStatus { free, held, deposited, dropped };
std::string_view status_name(ObjectStatus s);

struct WorldObject {
  int id = 0;
  Vec3 center;
  double diameter = 0;
  ObjectStatus status = ObjectStatus::free;
  friend bool operator==(const WorldObject&, const WorldObject&) = default;
};

struct WorldState {
  JointState joints;
  JointState target;
  double grip_force = 50.0;  // commanded force limit, N
  double grip_speed = 1.0;   // recorded only
  double contact_force = 0.0;
  TcpPose tcp;
  std::vector<WorldObject> objects;
  Rect box_region;
  Rect workspace;
  std::int64_t ticks = 0;
  double sim_time = 0.0;
  std::uint64_t rng_seed = 0;

  std::optional<int> held_index() const;
  int count(ObjectStatus s) const;
};

enum class GraspResult { held, no_object, out_of_reach, height, too_wide, crushed };
std::string_view grasp_result_name(GraspResult r);

struct GraspOutcome {
  GraspResult result = GraspResult::no_object;
  int object_index = -1;
  double width = 0;          // commanded opening, m
  double contact_force = 0;  // N
  bool held() const { return result == GraspResult::held; }
};

/// Contact force for a closure of width w around an object of diameter d.
double contact_force(const SimConfig& config, double diameter, double width, double force_limit);

/// Admissible closure window [lo, hi] for an object of this diameter.
std::pair<double, double> admissible_width(const SimConfig& config, double diameter);

/// Grasp predicate against the nearest free object (horizontal distance).
GraspOutcome attempt_grasp(const SimConfig& config, const WorldState& world, double commanded_g);

/// Advances the world by dt seconds toward target. Pure: the input state is
/// never touched, and non-finite targets throw non_finite.
WorldState step(const SimConfig& config, const WorldState& world, const JointState& target, double dt);

/// Uniform rejection sampling inside the workspace, away from the box.
std::vector<WorldObject> scatter_objects(const SimConfig& config, std::uint64_t seed, int n,
                                         double min_separation);

JointVector home_joints(const SimConfig& config);

/// Fresh world: arm at home, gripper open, n scattered objects.
WorldState make_world(const SimConfig& config, std::uint64_t seed, int n_objects);

nlohmann::json world_to_json(const WorldState& world);
WorldState world_from_json(const nlohmann::json& j);

}  // namespace vilas::sim
