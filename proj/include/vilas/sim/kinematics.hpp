#pragma once

#include <optional>

#include "vilas/sim/model.hpp"

namespace vilas::sim {

struct TcpPose {
  Vec3 position;
  double yaw = 0;  // atan2(R10, R00) of the tool frame
};

/// Composes the configured joint transforms. Throws limit_violation when q
/// is outside the joint limits; callers clamp first.
TcpPose forward_kinematics(const ArmModel& arm, const JointVector& q);

/// Elbow-up solution with the last link pointing straight down and the
/// wrist roll/yaw at zero. Empty when the point is unreachable or the
/// solution violates joint limits.
std::optional<JointVector> inverse_kinematics_topdown(const ArmModel& arm, const Vec3& tcp);

}  // namespace vilas::sim
