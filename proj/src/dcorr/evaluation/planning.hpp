#pragma once

#include <optional>

#include <json.hpp>

#include "dcorr/core/types.hpp"

namespace dcorr {

struct PlanOptions {
  double done_threshold_px = 3.0;
};

struct PlannedAction {
  bool done = false;
  Point2D pixel = Point2D::Zero();         // selected grasp pixel in the current frame
  Point2D target_pixel = Point2D::Zero();  // its correspondence in the goal frame
  double displacement_px = 0.0;
  Point3D grasp_point = Point3D::Zero();
  Point3D displacement = Point3D::Zero();  // 3D move, meters
};

// Picks the valid-depth pixel (inside `mask` when given) whose correspondence
// moves farthest, lowest raster index on ties. The goal point is
// back-projected with the source depth. `done` is set when the largest
// displacement is below the threshold. `flow` is full resolution [1,2,H,W];
// `depth` is [H,W] meters. Throws DataError when no pixel qualifies.
PlannedAction plan_action(const torch::Tensor& depth, const CameraIntrinsics& k, const FlowField& flow,
                          const std::optional<torch::Tensor>& mask = std::nullopt,
                          const PlanOptions& options = {});

nlohmann::json to_json(const PlannedAction& action);

}  // namespace dcorr
