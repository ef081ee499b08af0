#include "dcorr/evaluation/planning.hpp"

#include <cmath>

#include "dcorr/core/error.hpp"
#include "dcorr/core/geometry.hpp"

namespace dcorr {

PlannedAction plan_action(const torch::Tensor& depth, const CameraIntrinsics& k, const FlowField& flow,
                          const std::optional<torch::Tensor>& mask, const PlanOptions& options) {
  auto f = flow.data.dim() == 3 ? flow.data.unsqueeze(0) : flow.data;
  if (depth.dim() != 2 || f.dim() != 4 || f.size(1) != 2 || f.size(2) != depth.size(0) ||
      f.size(3) != depth.size(1)) {
    throw ArgumentError("plan_action: depth [H,W] and flow [1,2,H,W] must share H and W");
  }
  if (mask && mask->sizes() != depth.sizes()) throw ArgumentError("plan_action: mask must be [H,W]");
  const auto h = depth.size(0), w = depth.size(1);
  auto d = depth.to(torch::kFloat64).contiguous();
  auto fl = f[0].detach().to(torch::kFloat64).contiguous();
  auto m = mask ? mask->to(torch::kBool).contiguous() : torch::ones({h, w}, torch::kBool);
  auto da = d.accessor<double, 2>();
  auto fa = fl.accessor<double, 3>();
  auto ma = m.accessor<bool, 2>();

  int64_t best_x = -1, best_y = -1;
  double best = -1.0;
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      if (!ma[y][x] || !(da[y][x] > 0.0) || !std::isfinite(da[y][x])) continue;
      const double mag = std::hypot(fa[0][y][x], fa[1][y][x]);
      if (mag > best) {
        best = mag;
        best_x = x;
        best_y = y;
      }
    }
  }
  if (best_x < 0) throw DataError("plan_action: no pixel with valid depth" + std::string(mask ? " inside the mask" : ""));

  PlannedAction a;
  a.pixel = Point2D(double(best_x), double(best_y));
  a.target_pixel = a.pixel + Point2D(fa[0][best_y][best_x], fa[1][best_y][best_x]);
  a.displacement_px = best;
  const double z = da[best_y][best_x];
  a.grasp_point = backproject(a.pixel, z, k);
  a.done = best < options.done_threshold_px;
  if (!a.done) a.displacement = backproject(a.target_pixel, z, k) - a.grasp_point;
  return a;
}

nlohmann::json to_json(const PlannedAction& a) {
  if (a.done) {
    return {{"done", true}, {"displacement_px", a.displacement_px}};
  }
  return {{"done", false},
          {"pixel", {a.pixel.x(), a.pixel.y()}},
          {"target_pixel", {a.target_pixel.x(), a.target_pixel.y()}},
          {"displacement_px", a.displacement_px},
          {"grasp_point", {a.grasp_point.x(), a.grasp_point.y(), a.grasp_point.z()}},
          {"displacement", {a.displacement.x(), a.displacement.y(), a.displacement.z()}}};
}

}  // namespace dcorr
