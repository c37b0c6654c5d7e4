#include "vilas/sim/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "vilas/error.hpp"

namespace vilas::sim {

using nlohmann::json;

bool ArmModel::within_limits(const JointVector& q) const {
  for (int i = 0; i < kArmDof; ++i) {
    if (!(q[i] >= joint_limits[i].min && q[i] <= joint_limits[i].max)) return false;
  }
  return true;
}

JointVector ArmModel::clamp(const JointVector& q) const {
  JointVector out{};
  for (int i = 0; i < kArmDof; ++i) {
    out[i] = std::clamp(q[i], joint_limits[i].min, joint_limits[i].max);
  }
  return out;
}

void ArmModel::validate() const {
  for (double l : link_lengths) {
    if (!(l > 0)) throw Error(Errc::invalid_argument, "arm: link lengths must be positive");
  }
  for (int i = 0; i < kArmDof; ++i) {
    if (!(joint_limits[i].min < joint_limits[i].max)) {
      throw Error(Errc::invalid_argument, "arm: joint limit min must be below max");
    }
    if (!(max_joint_velocity[i] > 0)) {
      throw Error(Errc::invalid_argument, "arm: max joint velocity must be positive");
    }
  }
}

void GripperModel::validate() const {
  if (!(force_min > 0 && force_min < force_max)) {
    throw Error(Errc::invalid_argument, "gripper: need 0 < force_min < force_max");
  }
  if (!(stroke > 0)) throw Error(Errc::invalid_argument, "gripper: stroke must be positive");
  if (!(compliance_window >= 0)) throw Error(Errc::invalid_argument, "gripper: negative compliance window");
  if (!(force_cap_soft > 0 && force_cap_soft < force_max)) {
    throw Error(Errc::invalid_argument, "gripper: need 0 < force_cap_soft < force_max");
  }
  if (!(closure_rate > 0)) throw Error(Errc::invalid_argument, "gripper: closure rate must be positive");
}

void SimConfig::validate() const {
  arm.validate();
  gripper.validate();
  if (!(grasp.rigid_window < gripper.compliance_window)) {
    throw Error(Errc::invalid_argument, "grasp: rigid window must be below the compliance window");
  }
  if (!(task.workspace.width() > 0 && task.workspace.height() > 0)) {
    throw Error(Errc::invalid_argument, "task: empty workspace");
  }
  if (!(task.object.diameter_min > 0 && task.object.diameter_min <= task.object.diameter_max)) {
    throw Error(Errc::invalid_argument, "task: bad object diameter range");
  }
  if (camera.width <= 0 || camera.height <= 0 || camera.output_size <= 0) {
    throw Error(Errc::invalid_argument, "camera: bad resolution");
  }
}

SimConfig SimConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_argument, "config " + path + ": " + e.what());
  }
  SimConfig c = j.get<SimConfig>();
  c.validate();
  return c;
}

void to_json(json& j, const Vec3& v) { j = json::array({v.x, v.y, v.z}); }
void from_json(const json& j, Vec3& v) {
  v = {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

void to_json(json& j, const Rect& r) {
  j = {{"x_min", r.x_min}, {"x_max", r.x_max}, {"y_min", r.y_min}, {"y_max", r.y_max}};
}
void from_json(const json& j, Rect& r) {
  r = {j.at("x_min").get<double>(), j.at("x_max").get<double>(), j.at("y_min").get<double>(),
       j.at("y_max").get<double>()};
}

namespace {

const char* axis_label(JointAxis a) {
  switch (a) {
    case JointAxis::yaw: return "yaw";
    case JointAxis::pitch: return "pitch";
    case JointAxis::roll: return "roll";
  }
  return "yaw";
}

JointAxis axis_from_label(const std::string& s) {
  if (s == "yaw") return JointAxis::yaw;
  if (s == "pitch") return JointAxis::pitch;
  if (s == "roll") return JointAxis::roll;
  throw Error(Errc::invalid_argument, "unknown joint axis '" + s + "'");
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

}  // namespace

void to_json(json& j, const SimConfig& c) {
  json axes = json::array();
  json limits = json::array();
  for (int i = 0; i < kArmDof; ++i) {
    axes.push_back(axis_label(c.arm.joint_axes[i]));
    limits.push_back({c.arm.joint_limits[i].min, c.arm.joint_limits[i].max});
  }
  j = {
      {"arm",
       {{"link_lengths", c.arm.link_lengths},
        {"joint_axes", axes},
        {"joint_limits", limits},
        {"max_joint_velocity", c.arm.max_joint_velocity}}},
      {"gripper",
       {{"stroke", c.gripper.stroke},
        {"force_min", c.gripper.force_min},
        {"force_max", c.gripper.force_max},
        {"contact_stiffness", c.gripper.contact_stiffness},
        {"compliant_extension", c.gripper.compliant_extension},
        {"compliance_window", c.gripper.compliance_window},
        {"force_cap_soft", c.gripper.force_cap_soft},
        {"closure_rate", c.gripper.closure_rate}}},
      {"grasp",
       {{"grasp_radius", c.grasp.grasp_radius},
        {"grasp_height_band", c.grasp.grasp_height_band},
        {"rigid_window", c.grasp.rigid_window},
        {"approach_margin", c.grasp.approach_margin}}},
      {"task",
       {{"workspace", c.task.workspace},
        {"box", c.task.box},
        {"table_z", c.task.table_z},
        {"travel_height", c.task.travel_height},
        {"home_tcp", c.task.home_tcp},
        {"object",
         {{"name", c.task.object.name},
          {"diameter_min", c.task.object.diameter_min},
          {"diameter_max", c.task.object.diameter_max},
          {"color", {c.task.object.color.r, c.task.object.color.g, c.task.object.color.b}}}},
        {"n_objects", c.task.n_objects},
        {"min_separation", c.task.min_separation}}},
      {"camera",
       {{"width", c.camera.width},
        {"height", c.camera.height},
        {"wrist_window_width", c.camera.wrist_window_width},
        {"wrist_window_height", c.camera.wrist_window_height},
        {"output_size", c.camera.output_size}}},
  };
}

// Every key is optional; missing keys keep their defaults.
void from_json(const json& j, SimConfig& c) {
  if (auto a = j.find("arm"); a != j.end()) {
    read_opt(*a, "link_lengths", c.arm.link_lengths);
    read_opt(*a, "max_joint_velocity", c.arm.max_joint_velocity);
    if (auto ax = a->find("joint_axes"); ax != a->end()) {
      for (int i = 0; i < kArmDof; ++i) c.arm.joint_axes[i] = axis_from_label(ax->at(i).get<std::string>());
    }
    if (auto lim = a->find("joint_limits"); lim != a->end()) {
      for (int i = 0; i < kArmDof; ++i) {
        c.arm.joint_limits[i] = {lim->at(i).at(0).get<double>(), lim->at(i).at(1).get<double>()};
      }
    }
  }
  if (auto g = j.find("gripper"); g != j.end()) {
    read_opt(*g, "stroke", c.gripper.stroke);
    read_opt(*g, "force_min", c.gripper.force_min);
    read_opt(*g, "force_max", c.gripper.force_max);
    read_opt(*g, "contact_stiffness", c.gripper.contact_stiffness);
    read_opt(*g, "compliant_extension", c.gripper.compliant_extension);
    read_opt(*g, "compliance_window", c.gripper.compliance_window);
    read_opt(*g, "force_cap_soft", c.gripper.force_cap_soft);
    read_opt(*g, "closure_rate", c.gripper.closure_rate);
  }
  if (auto g = j.find("grasp"); g != j.end()) {
    read_opt(*g, "grasp_radius", c.grasp.grasp_radius);
    read_opt(*g, "grasp_height_band", c.grasp.grasp_height_band);
    read_opt(*g, "rigid_window", c.grasp.rigid_window);
    read_opt(*g, "approach_margin", c.grasp.approach_margin);
  }
  if (auto t = j.find("task"); t != j.end()) {
    read_opt(*t, "workspace", c.task.workspace);
    read_opt(*t, "box", c.task.box);
    read_opt(*t, "table_z", c.task.table_z);
    read_opt(*t, "travel_height", c.task.travel_height);
    read_opt(*t, "home_tcp", c.task.home_tcp);
    read_opt(*t, "n_objects", c.task.n_objects);
    read_opt(*t, "min_separation", c.task.min_separation);
    if (auto o = t->find("object"); o != t->end()) {
      if (o->is_string()) {
        const auto name = o->get<std::string>();
        if (name == "grape") c.task.object = ObjectSpec::grape();
        else if (name == "cherry") c.task.object = ObjectSpec::cherry();
        else throw Error(Errc::invalid_argument, "unknown object kind '" + name + "'");
      } else {
        read_opt(*o, "name", c.task.object.name);
        read_opt(*o, "diameter_min", c.task.object.diameter_min);
        read_opt(*o, "diameter_max", c.task.object.diameter_max);
        if (auto col = o->find("color"); col != o->end()) {
          c.task.object.color = {col->at(0).get<std::uint8_t>(), col->at(1).get<std::uint8_t>(),
                                 col->at(2).get<std::uint8_t>()};
        }
      }
    }
  }
  if (auto cam = j.find("camera"); cam != j.end()) {
    read_opt(*cam, "width", c.camera.width);
    read_opt(*cam, "height", c.camera.height);
    read_opt(*cam, "wrist_window_width", c.camera.wrist_window_width);
    read_opt(*cam, "wrist_window_height", c.camera.wrist_window_height);
    read_opt(*cam, "output_size", c.camera.output_size);
  }
}

}  // namespace vilas::sim
