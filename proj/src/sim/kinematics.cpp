#include "vilas/sim/kinematics.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>

#include "vilas/error.hpp"

namespace vilas::sim {

namespace {

// Length of the link that follows each joint.
std::array<double, kArmDof> link_after_joint(const ArmModel& arm) {
  return {0.0, arm.link_lengths[0], arm.link_lengths[1], arm.link_lengths[2], 0.0, 0.0};
}

Eigen::Matrix3d joint_rotation(JointAxis axis, double angle) {
  switch (axis) {
    case JointAxis::yaw:
      return Eigen::AngleAxisd(angle, Eigen::Vector3d::UnitZ()).toRotationMatrix();
    case JointAxis::pitch:
      // Positive pitch lifts the local +x axis toward +z.
      return Eigen::AngleAxisd(-angle, Eigen::Vector3d::UnitY()).toRotationMatrix();
    case JointAxis::roll:
      return Eigen::AngleAxisd(angle, Eigen::Vector3d::UnitX()).toRotationMatrix();
  }
  return Eigen::Matrix3d::Identity();
}

}  // namespace

TcpPose forward_kinematics(const ArmModel& arm, const JointVector& q) {
  if (!arm.within_limits(q)) {
    throw Error(Errc::limit_violation, "forward_kinematics: joint configuration outside limits");
  }
  const auto links = link_after_joint(arm);
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  for (int i = 0; i < kArmDof; ++i) {
    t.rotate(joint_rotation(arm.joint_axes[i], q[i]));
    if (links[i] != 0.0) t.translate(Eigen::Vector3d(links[i], 0.0, 0.0));
  }
  const Eigen::Vector3d p = t.translation();
  const Eigen::Matrix3d r = t.rotation();
  return {{p.x(), p.y(), p.z()}, std::atan2(r(1, 0), r(0, 0))};
}

std::optional<JointVector> inverse_kinematics_topdown(const ArmModel& arm, const Vec3& tcp) {
  const double l1 = arm.link_lengths[0];
  const double l2 = arm.link_lengths[1];
  const double l3 = arm.link_lengths[2];

  const double r = std::hypot(tcp.x, tcp.y);
  const double wz = tcp.z + l3;
  const double d = (r * r + wz * wz - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
  if (d < -1.0 || d > 1.0) return std::nullopt;

  JointVector q{};
  q[0] = std::atan2(tcp.y, tcp.x);
  q[2] = -std::acos(d);
  q[1] = std::atan2(wz, r) - std::atan2(l2 * std::sin(q[2]), l1 + l2 * std::cos(q[2]));
  q[3] = -std::numbers::pi / 2.0 - q[1] - q[2];
  if (!arm.within_limits(q)) return std::nullopt;
  return q;
}

}  // namespace vilas::sim
