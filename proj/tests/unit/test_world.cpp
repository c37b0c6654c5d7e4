#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "vilas/error.hpp"
#include "vilas/sim/world.hpp"

using namespace vilas;
using namespace vilas::sim;

namespace {

WorldState world_with_grape(const SimConfig& cfg, Vec3 xy, double diameter) {
  WorldState w = make_world(cfg, 1, 0);
  w.objects.push_back({0, {xy.x, xy.y, cfg.task.table_z + diameter / 2}, diameter, ObjectStatus::free});
  return w;
}

// Steps until joints and gripper settle on the target (bounded).
WorldState run_to(const SimConfig& cfg, WorldState w, const JointState& target, int max_steps = 5000) {
  for (int i = 0; i < max_steps; ++i) {
    w = step(cfg, w, target, 0.004);
    if (w.joints == w.target) {
      // one more tick so settling transitions are applied
      return step(cfg, w, target, 0.004);
    }
  }
  FAIL("did not settle");
  return w;
}

}  // namespace

TEST_CASE("step with the current state as target is a fixed point") {
  SimConfig cfg;
  const WorldState w0 = make_world(cfg, 3, 10);
  const WorldState w1 = step(cfg, w0, w0.joints, 0.05);
  CHECK(w1.joints == w0.joints);
  CHECK(w1.objects == w0.objects);
  CHECK(w1.tcp.position.x == doctest::Approx(w0.tcp.position.x));
  CHECK(w1.sim_time == doctest::Approx(0.05));
}

TEST_CASE("rate limit arithmetic") {
  SimConfig cfg;
  WorldState w = make_world(cfg, 3, 0);
  w.joints.q[0] = 0.0;
  JointState target = w.joints;
  target.q[0] = 1.0;
  w = step(cfg, w, target, 0.05);
  CHECK(w.joints.q[0] == doctest::Approx(0.1));
}

TEST_CASE("property: joint motion never exceeds max velocity times dt") {
  SimConfig cfg;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-3.5, 3.5), udt(0.001, 0.2), ug(-0.5, 1.5);
  WorldState w = make_world(cfg, 11, 5);
  for (int i = 0; i < 2000; ++i) {
    JointState target;
    for (auto& v : target.q) v = u(rng);
    target.g = ug(rng);
    const double dt = udt(rng);
    const WorldState next = step(cfg, w, target, dt);
    for (int j = 0; j < kArmDof; ++j) {
      CHECK(std::abs(next.joints.q[j] - w.joints.q[j]) <= cfg.arm.max_joint_velocity[j] * dt + 1e-12);
    }
    CHECK(cfg.arm.within_limits(next.joints.q));
    CHECK(next.joints.g >= 0.0);
    CHECK(next.joints.g <= 1.0);
    CHECK(next.sim_time >= w.sim_time);
    CHECK(next.count(ObjectStatus::held) <= 1);
    w = next;
  }
}

TEST_CASE("non-finite targets are rejected") {
  SimConfig cfg;
  const WorldState w = make_world(cfg, 3, 0);
  JointState target = w.joints;
  target.q[2] = std::numeric_limits<double>::quiet_NaN();
  try {
    step(cfg, w, target, 0.01);
    FAIL("expected non-finite error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::non_finite);
  }
}

TEST_CASE("attempt_grasp: exact-fit closure holds with zero force") {
  SimConfig cfg;
  WorldState w = world_with_grape(cfg, {0.5, 0.0, 0}, 0.020);
  w.tcp.position = {0.505, 0.0, w.objects[0].center.z};
  const auto out = attempt_grasp(cfg, w, cfg.gripper.closure_for_width(0.020));
  CHECK(out.held());
  CHECK(out.contact_force == doctest::Approx(0.0));
}

TEST_CASE("attempt_grasp: compliance window admits closures that crush rigidly") {
  SimConfig cfg;
  const double d = 0.020;
  WorldState w = world_with_grape(cfg, {0.5, 0.0, 0}, d);
  w.tcp.position = {0.5, 0.0, w.objects[0].center.z};
  const double g = cfg.gripper.closure_for_width(d - cfg.gripper.compliance_window);

  cfg.gripper.compliant_extension = true;
  auto soft = attempt_grasp(cfg, w, g);
  CHECK(soft.held());
  CHECK(soft.contact_force ==
        doctest::Approx(std::min(cfg.gripper.contact_stiffness * cfg.gripper.compliance_window,
                                 cfg.gripper.force_cap_soft)));

  cfg.gripper.compliant_extension = false;
  auto rigid = attempt_grasp(cfg, w, g);
  CHECK_FALSE(rigid.held());
  CHECK(rigid.result == GraspResult::crushed);
}

TEST_CASE("attempt_grasp: brute-force sweep shows a wider admissible interval with compliance") {
  SimConfig cfg;
  const double d = 0.020;
  WorldState w = world_with_grape(cfg, {0.5, 0.0, 0}, d);
  w.tcp.position = {0.5, 0.0, w.objects[0].center.z};

  auto admissible_length = [&](bool compliant) {
    cfg.gripper.compliant_extension = compliant;
    int count = 0;
    // 0.1 mm resolution from full stroke down to zero.
    for (int k = 520; k >= 0; --k) {
      const double width = k * 1e-4;
      if (attempt_grasp(cfg, w, cfg.gripper.closure_for_width(width)).held()) ++count;
    }
    return count;
  };
  const int soft = admissible_length(true);
  const int rigid = admissible_length(false);
  // [d-6mm, d+4mm] -> 101 samples; [d-1mm, d+4mm] -> 51 samples
  CHECK(soft == 101);
  CHECK(rigid == 51);
  CHECK(soft > rigid);
}

TEST_CASE("attempt_grasp: geometric rejections") {
  SimConfig cfg;
  WorldState w = world_with_grape(cfg, {0.5, 0.0, 0}, 0.020);
  const double g = cfg.gripper.closure_for_width(0.018);
  w.tcp.position = {0.52, 0.0, w.objects[0].center.z};
  CHECK(attempt_grasp(cfg, w, g).result == GraspResult::out_of_reach);
  w.tcp.position = {0.5, 0.0, w.objects[0].center.z + 0.05};
  CHECK(attempt_grasp(cfg, w, g).result == GraspResult::height);
  w.tcp.position = {0.5, 0.0, w.objects[0].center.z};
  CHECK(attempt_grasp(cfg, w, 0.0).result == GraspResult::too_wide);
  w.objects.clear();
  CHECK(attempt_grasp(cfg, w, g).result == GraspResult::no_object);
}

TEST_CASE("property: contact force stays under its cap") {
  SimConfig cfg;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ud(0.010, 0.040), uw(0.0, 0.052), uf(0.0, 80.0);
  for (int i = 0; i < 5000; ++i) {
    const double d = ud(rng), width = uw(rng), limit = uf(rng);
    cfg.gripper.compliant_extension = true;
    CHECK(contact_force(cfg, d, width, limit) <= cfg.gripper.force_cap_soft);
    cfg.gripper.compliant_extension = false;
    CHECK(contact_force(cfg, d, width, limit) <= cfg.gripper.force_max);
  }
}

TEST_CASE("property: rigid-admissible widths are compliant-admissible") {
  SimConfig cfg;
  for (double d = 0.018; d <= 0.024; d += 0.0005) {
    const auto rigid = [&] {
      cfg.gripper.compliant_extension = false;
      return admissible_width(cfg, d);
    }();
    cfg.gripper.compliant_extension = true;
    const auto soft = admissible_width(cfg, d);
    CHECK(soft.first <= rigid.first);
    CHECK(soft.second >= rigid.second);
  }
}

TEST_CASE("scripted approach, close and lift picks up the grape") {
  SimConfig cfg;
  const double d = 0.020;
  WorldState w = world_with_grape(cfg, {0.55, 0.05, 0}, d);
  const Vec3 grape = w.objects[0].center;

  // approach: TCP at the grape center, gripper open
  JointState approach{*inverse_kinematics_topdown(cfg.arm, grape), 0.0};
  w = run_to(cfg, w, approach);
  CHECK(w.objects[0].status == ObjectStatus::free);

  // close to w = d - 3 mm. By hand: horizontal distance 0 <= 15 mm,
  // |tcp z - top| = d/2 = 10 mm <= 20 mm, 17 mm in [14, 24] mm -> held;
  // force = min(4000 N/m * 3 mm, 10 N) = 10 N.
  JointState close = approach;
  close.g = cfg.gripper.closure_for_width(d - 0.003);
  w = run_to(cfg, w, close);
  CHECK(w.objects[0].status == ObjectStatus::held);
  CHECK(w.contact_force == doctest::Approx(10.0));

  JointState lift = close;
  lift.q = *inverse_kinematics_topdown(cfg.arm, {grape.x, grape.y, grape.z + 0.1});
  w = run_to(cfg, w, lift);
  CHECK(w.objects[0].status == ObjectStatus::held);
  CHECK(w.objects[0].center == w.tcp.position);
  CHECK(w.objects[0].center.z == doctest::Approx(grape.z + 0.1).epsilon(1e-9));

  SUBCASE("opening outside the box drops it") {
    JointState open = lift;
    open.g = 0.0;
    w = run_to(cfg, w, open);
    CHECK(w.objects[0].status == ObjectStatus::dropped);
  }
  SUBCASE("opening over the box deposits it") {
    const auto& box = cfg.task.box;
    JointState over = lift;
    over.q = *inverse_kinematics_topdown(cfg.arm, {(box.x_min + box.x_max) / 2, (box.y_min + box.y_max) / 2, 0.0});
    w = run_to(cfg, w, over);
    CHECK(w.objects[0].status == ObjectStatus::held);
    over.g = 0.0;
    w = run_to(cfg, w, over);
    CHECK(w.objects[0].status == ObjectStatus::deposited);
    // deposited objects never change status again
    for (int i = 0; i < 200; ++i) w = step(cfg, w, approach, 0.004);
    CHECK(w.objects[0].status == ObjectStatus::deposited);
  }
}

TEST_CASE("scatter_objects is reproducible and respects bounds") {
  SimConfig cfg;
  const auto a = scatter_objects(cfg, 1234, 10, 0.030);
  const auto b = scatter_objects(cfg, 1234, 10, 0.030);
  CHECK(a == b);
  CHECK(a != scatter_objects(cfg, 1235, 10, 0.030));

  const auto one = scatter_objects(cfg, 99, 1, 0.030);
  REQUIRE(one.size() == 1);
  CHECK(cfg.task.workspace.contains(one[0].center.x, one[0].center.y));
}

TEST_CASE("scatter_objects: exhaustive pairwise separation over many seeds") {
  SimConfig cfg;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto objs = scatter_objects(cfg, seed, 10, 0.030);
    REQUIRE(objs.size() == 10);
    int pairs = 0;
    for (std::size_t i = 0; i < objs.size(); ++i) {
      CHECK(cfg.task.workspace.contains(objs[i].center.x, objs[i].center.y));
      CHECK_FALSE(cfg.task.box.contains(objs[i].center.x, objs[i].center.y));
      CHECK(objs[i].diameter >= 0.018);
      CHECK(objs[i].diameter <= 0.024);
      for (std::size_t j = i + 1; j < objs.size(); ++j) {
        ++pairs;
        CHECK(std::hypot(objs[i].center.x - objs[j].center.x, objs[i].center.y - objs[j].center.y) >= 0.030);
      }
    }
    CHECK(pairs == 45);
  }
}

TEST_CASE("scatter_objects reports infeasible layouts") {
  SimConfig cfg;
  try {
    scatter_objects(cfg, 1, 200, 0.1);
    FAIL("expected infeasible placement");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::placement_infeasible);
  }
}

TEST_CASE("world json roundtrip") {
  SimConfig cfg;
  const WorldState w = make_world(cfg, 5, 10);
  const WorldState back = world_from_json(world_to_json(w));
  CHECK(back.objects == w.objects);
  CHECK(back.joints == w.joints);
  CHECK(back.box_region == w.box_region);
}

TEST_CASE("sim config json roundtrip and partial override") {
  SimConfig cfg;
  cfg.gripper.compliant_extension = false;
  cfg.task.object = ObjectSpec::cherry();
  const nlohmann::json j = cfg;
  const SimConfig back = j.get<SimConfig>();
  CHECK(nlohmann::json(back) == j);

  const SimConfig partial = nlohmann::json::parse(R"({"task": {"object": "cherry"}})").get<SimConfig>();
  CHECK(partial.task.object.name == "cherry");
  CHECK(partial.arm.reach() == doctest::Approx(0.922));
}
