#pragma once

#include <torch/torch.h>

#include <Eigen/Core>

namespace dcorr {

// Pixels per feature cell for every encoder in the pipeline.
inline constexpr int kFeatureStride = 8;

using Point2D = Eigen::Vector2d;
using Point3D = Eigen::Vector3d;

enum class FlowResolution { Feature, Full };

// Batched displacement raster [B, 2, h, w]; channel 0 is dx, channel 1 is dy,
// both in pixels of this raster.
struct FlowField {
  torch::Tensor data;
  FlowResolution resolution = FlowResolution::Full;

  int64_t height() const { return data.size(2); }
  int64_t width() const { return data.size(3); }
};

// Batched feature raster [B, c, h, w].
struct FeatureMap {
  torch::Tensor data;
  int stride = kFeatureStride;

  int64_t channels() const { return data.size(1); }
  int64_t height() const { return data.size(2); }
  int64_t width() const { return data.size(3); }
};

// coords[y][x] = (x, y), shape [h, w, 2].
struct PixelGrid {
  torch::Tensor coords;
};

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
};

}  // namespace dcorr
