#include "dcorr/core/geometry.hpp"

#include <cmath>
#include <string>

#include "dcorr/core/error.hpp"

namespace dcorr {

PixelGrid make_pixel_grid(int64_t h, int64_t w, torch::ScalarType dtype) {
  if (h < 1 || w < 1) {
    throw ArgumentError("make_pixel_grid: dimensions must be positive, got " +
                        std::to_string(h) + "x" + std::to_string(w));
  }
  auto opts = torch::TensorOptions().dtype(dtype);
  auto xs = torch::arange(w, opts).view({1, w}).expand({h, w});
  auto ys = torch::arange(h, opts).view({h, 1}).expand({h, w});
  return PixelGrid{torch::stack({xs, ys}, -1).contiguous()};
}

torch::Tensor bilinear_sample(const torch::Tensor& map, const torch::Tensor& coords_in) {
  if (map.dim() != 4 || coords_in.dim() != 4 || coords_in.size(3) != 2) {
    throw ArgumentError("bilinear_sample: expected map [B,D,h,w] and coords [B,Hq,Wq,2]");
  }
  if (map.size(0) != coords_in.size(0)) {
    throw ArgumentError("bilinear_sample: batch size mismatch");
  }
  if (torch::isnan(coords_in).any().item<bool>()) {
    throw ComputationError("bilinear_sample: NaN query coordinate");
  }
  const int64_t b = map.size(0), d = map.size(1), h = map.size(2), w = map.size(3);
  const int64_t hq = coords_in.size(1), wq = coords_in.size(2);
  auto coords = coords_in.to(map.scalar_type());

  auto x = coords.select(3, 0).clamp(0, static_cast<double>(w - 1));
  auto y = coords.select(3, 1).clamp(0, static_cast<double>(h - 1));
  // Lower corner is kept one cell inside the far edge so the upper corner
  // always exists; an exact edge query then gets weight 1 on the upper cell.
  auto x0 = x.detach().floor().clamp_max(static_cast<double>(std::max<int64_t>(w - 2, 0)));
  auto y0 = y.detach().floor().clamp_max(static_cast<double>(std::max<int64_t>(h - 2, 0)));
  auto wx = (x - x0).unsqueeze(1);
  auto wy = (y - y0).unsqueeze(1);

  auto x0i = x0.to(torch::kLong);
  auto y0i = y0.to(torch::kLong);
  auto x1i = (x0i + 1).clamp_max(w - 1);
  auto y1i = (y0i + 1).clamp_max(h - 1);

  auto flat = map.reshape({b, d, h * w});
  auto fetch = [&](const torch::Tensor& yi, const torch::Tensor& xi) {
    auto idx = (yi * w + xi).reshape({b, 1, hq * wq}).expand({b, d, hq * wq});
    return flat.gather(2, idx).reshape({b, d, hq, wq});
  };
  auto v00 = fetch(y0i, x0i);
  auto v01 = fetch(y0i, x1i);
  auto v10 = fetch(y1i, x0i);
  auto v11 = fetch(y1i, x1i);
  return v00 * (1 - wx) * (1 - wy) + v01 * wx * (1 - wy) + v10 * (1 - wx) * wy +
         v11 * wx * wy;
}

torch::Tensor warp_by_flow(const torch::Tensor& map, const FlowField& flow) {
  if (map.dim() != 4 || flow.data.dim() != 4 || flow.data.size(1) != 2) {
    throw ArgumentError("warp_by_flow: expected map [B,D,h,w] and flow [B,2,h,w]");
  }
  if (map.size(2) != flow.height() || map.size(3) != flow.width()) {
    throw ArgumentError("warp_by_flow: flow resolution " + std::to_string(flow.height()) +
                        "x" + std::to_string(flow.width()) + " does not match map " +
                        std::to_string(map.size(2)) + "x" + std::to_string(map.size(3)));
  }
  auto grid = make_pixel_grid(map.size(2), map.size(3), map.scalar_type()).coords;
  auto coords = grid.unsqueeze(0) + flow.data.to(map.scalar_type()).permute({0, 2, 3, 1});
  return bilinear_sample(map, coords);
}

FlowField upsample_flow(const FlowField& flow, int stride) {
  if (stride != kFeatureStride) {
    throw ArgumentError("upsample_flow: stride must be " + std::to_string(kFeatureStride));
  }
  if (flow.data.dim() != 4 || flow.data.size(1) != 2) {
    throw ArgumentError("upsample_flow: expected flow [B,2,h,w]");
  }
  const int64_t b = flow.data.size(0);
  const int64_t full_h = flow.height() * stride, full_w = flow.width() * stride;
  // Full-resolution pixel centers expressed in feature-cell coordinates.
  auto grid = make_pixel_grid(full_h, full_w, flow.data.scalar_type()).coords;
  auto query = ((grid + 0.5) / stride - 0.5).unsqueeze(0).expand({b, full_h, full_w, 2});
  auto up = bilinear_sample(flow.data, query) * static_cast<double>(stride);
  return FlowField{up, FlowResolution::Full};
}

Point3D backproject(const Point2D& pixel, double depth, const CameraIntrinsics& k) {
  if (!(depth > 0.0)) {
    throw DataError("backproject: depth must be positive, got " + std::to_string(depth));
  }
  return {(pixel.x() - k.cx) * depth / k.fx, (pixel.y() - k.cy) * depth / k.fy, depth};
}

Point2D project(const Point3D& point, const CameraIntrinsics& k) {
  if (!(point.z() > 0.0)) {
    throw DataError("project: point must lie in front of the camera");
  }
  return {k.fx * point.x() / point.z() + k.cx, k.fy * point.y() / point.z() + k.cy};
}

void check_image(const torch::Tensor& image, const char* name) {
  if (image.dim() != 4 || image.size(1) != 3) {
    throw ArgumentError(std::string(name) + ": expected image tensor [B,3,H,W]");
  }
  const auto h = image.size(2), w = image.size(3);
  if (h <= 0 || w <= 0 || h % kFeatureStride != 0 || w % kFeatureStride != 0) {
    throw ArgumentError(std::string(name) + ": image size " + std::to_string(h) + "x" +
                        std::to_string(w) + " must be positive and divisible by " +
                        std::to_string(kFeatureStride));
  }
  if (!torch::isfinite(image).all().item<bool>()) {
    throw ArgumentError(std::string(name) + ": image contains non-finite values");
  }
}

}  // namespace dcorr
