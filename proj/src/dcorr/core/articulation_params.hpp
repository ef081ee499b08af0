#pragma once

#include <Eigen/Geometry>

namespace dcorr {

// Revolute joint: rotation by `state_deg` about the line through `pivot`
// along the unit vector `axis` (right-hand rule).
struct ArticulationParams {
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
  Eigen::Vector3d pivot = Eigen::Vector3d::Zero();
  double state_deg = 0.0;
};

// x -> R x + t for the motion the parameters describe.
inline Eigen::Isometry3d joint_transform(const ArticulationParams& p) {
  constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.linear() = Eigen::AngleAxisd(p.state_deg * kDegToRad, p.axis.normalized()).toRotationMatrix();
  t.translation() = p.pivot - t.linear() * p.pivot;
  return t;
}

}  // namespace dcorr
