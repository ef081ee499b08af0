#pragma once

#include <vector>

#include <Eigen/Geometry>
#include <json.hpp>

#include "dcorr/core/articulation_params.hpp"
#include "dcorr/core/types.hpp"

namespace dcorr {

struct LiftedCorrespondences {
  std::vector<Point3D> source, target;
  std::vector<size_t> kept;  // indices of the input pairs that survived
  int64_t dropped = 0;       // pairs without valid depth at either end
};

// Back-projects query/prediction pixel pairs through nearest-pixel depth
// lookups. Pairs whose rounded pixel falls outside a raster or onto depth <= 0
// are dropped. Throws DataError when nothing survives.
LiftedCorrespondences lift_correspondences(const std::vector<Point2D>& queries,
                                           const std::vector<Point2D>& predictions,
                                           const torch::Tensor& depth1, const torch::Tensor& depth2,
                                           const CameraIntrinsics& k);

struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
};

// Least-squares rotation and translation with tgt ~ R src + t (centroid
// alignment, orthogonal Procrustes, det(R) = +1). Throws RankError for fewer
// than three pairs or collinear sources.
RigidTransform fit_rigid_transform(const std::vector<Point3D>& src, const std::vector<Point3D>& tgt);

inline constexpr double kMinRevoluteAngleDeg = 0.5;

// Rigid fit followed by a screw decomposition: axis and angle of R, pivot as
// the minimum-norm least-squares solution of (I - R) q = t. Rotations under
// kMinRevoluteAngleDeg raise DegenerateMotionError.
ArticulationParams fit_revolute_joint(const std::vector<Point3D>& src, const std::vector<Point3D>& tgt);

struct ArticulationErrors {
  double angle_deg = 0.0;         // between the axis lines, sign-invariant
  double position_m = 0.0;        // distance between the two axis lines
  double position_point_m = 0.0;  // ground-truth pivot to the predicted axis line
  double state_deg = 0.0;
  double distance_m = 0.0;        // mean |T_gt src - predicted target|
};

// `src` and `predicted_tgt` are the lifted correspondences the prediction was
// fitted on. The state error flips the predicted angle when the axes point in
// opposite directions and is wrapped into [0, 180].
ArticulationErrors articulation_errors(const ArticulationParams& pred, const ArticulationParams& gt,
                                       const std::vector<Point3D>& src,
                                       const std::vector<Point3D>& predicted_tgt);

nlohmann::json to_json(const ArticulationParams& p);
nlohmann::json to_json(const ArticulationErrors& e);

}  // namespace dcorr
