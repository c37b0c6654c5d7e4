#pragma once

#include <array>
#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "vilas/image.hpp"

namespace vilas::sim {

inline constexpr int kArmDof = 6;
inline constexpr int kStateDim = 7;

using JointVector = std::array<double, kArmDof>;
using StateVector = std::array<double, kStateDim>;

struct Vec3 {
  double x = 0, y = 0, z = 0;
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

/// Axis-aligned rectangle on the table plane (meters).
struct Rect {
  double x_min = 0, x_max = 0, y_min = 0, y_max = 0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  bool contains(double x, double y) const {
    return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
  }
  Rect inflated(double m) const { return {x_min - m, x_max + m, y_min - m, y_max + m}; }
  friend bool operator==(const Rect&, const Rect&) = default;
};

enum class JointAxis { yaw, pitch, roll };

struct JointLimit {
  double min = 0, max = 0;
  friend bool operator==(const JointLimit&, const JointLimit&) = default;
};

/// Serial 6-joint arm. Links follow joints 1, 2 and 3; joints 0, 4 and 5
/// carry no length. Zero pose is the fully extended chain along +x.
struct ArmModel {
  std::array<double, 3> link_lengths{0.425, 0.395, 0.102};
  std::array<JointAxis, kArmDof> joint_axes{JointAxis::yaw,   JointAxis::pitch, JointAxis::pitch,
                                            JointAxis::pitch, JointAxis::roll,  JointAxis::yaw};
  std::array<JointLimit, kArmDof> joint_limits{{{-3.05, 3.05},
                                                {-1.60, 2.60},
                                                {-2.80, 2.80},
                                                {-3.05, 3.05},
                                                {-3.05, 3.05},
                                                {-3.05, 3.05}}};
  JointVector max_joint_velocity{2.0, 2.0, 2.0, 2.0, 2.0, 2.0};

  double reach() const { return link_lengths[0] + link_lengths[1] + link_lengths[2]; }
  bool within_limits(const JointVector& q) const;
  JointVector clamp(const JointVector& q) const;
  void validate() const;
};

/// Parallel gripper. Normalized closure g maps linearly to the opening
/// width: w = stroke * (1 - g), so g = 0 is fully open.
struct GripperModel {
  double stroke = 0.052;
  double force_min = 2.0;
  double force_max = 50.0;
  double contact_stiffness = 4000.0;  // N/m
  bool compliant_extension = true;
  double compliance_window = 0.006;
  double force_cap_soft = 10.0;
  double closure_rate = 2.0;  // normalized closure per second

  double width(double g) const { return stroke * (1.0 - g); }
  double closure_for_width(double w) const { return 1.0 - w / stroke; }
  void validate() const;
};

struct GraspParams {
  double grasp_radius = 0.015;
  double grasp_height_band = 0.020;
  double rigid_window = 0.001;
  double approach_margin = 0.004;
};

struct ObjectSpec {
  std::string name = "grape";
  double diameter_min = 0.018;
  double diameter_max = 0.024;
  Rgb color{112, 44, 128};

  static ObjectSpec grape() { return {}; }
  static ObjectSpec cherry() { return {"cherry", 0.020, 0.026, Rgb{178, 24, 38}}; }
};

struct TaskLayout {
  Rect workspace{0.30, 0.70, -0.15, 0.15};
  Rect box{0.30, 0.38, 0.09, 0.15};
  double table_z = -0.10;
  double travel_height = 0.10;  // above the table
  Vec3 home_tcp{0.50, 0.0, 0.0};
  ObjectSpec object;
  int n_objects = 10;
  double min_separation = 0.030;
};

struct CameraConfig {
  int width = 640;
  int height = 480;
  double wrist_window_width = 0.10;
  double wrist_window_height = 0.075;
  int output_size = 224;
};

struct SimConfig {
  ArmModel arm;
  GripperModel gripper;
  GraspParams grasp;
  TaskLayout task;
  CameraConfig camera;

  void validate() const;
  static SimConfig load(const std::string& path);
};

void to_json(nlohmann::json& j, const Vec3& v);
void from_json(const nlohmann::json& j, Vec3& v);
void to_json(nlohmann::json& j, const Rect& r);
void from_json(const nlohmann::json& j, Rect& r);
void to_json(nlohmann::json& j, const SimConfig& c);
void from_json(const nlohmann::json& j, SimConfig& c);

}  // namespace vilas::sim
