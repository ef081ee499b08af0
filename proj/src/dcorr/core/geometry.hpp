#pragma once

#include "dcorr/core/types.hpp"

namespace dcorr {

// Integer coordinate raster with coords[y][x] == (x, y).
PixelGrid make_pixel_grid(int64_t h, int64_t w,
                          torch::ScalarType dtype = torch::kFloat32);

// Samples `map` [B, D, h, w] at `coords` [B, Hq, Wq, 2] (x, y in cell units,
// cell centers on integers). Out-of-range queries are clamped to the border.
// Differentiable with respect to both the map and the coordinates.
torch::Tensor bilinear_sample(const torch::Tensor& map, const torch::Tensor& coords);

// output[y][x] = map sampled at (x, y) + flow[y][x]. `flow` must share the
// map's spatial resolution.
torch::Tensor warp_by_flow(const torch::Tensor& map, const FlowField& flow);

// Bilinear resampling of a feature-resolution flow to stride-times the
// resolution, with displacements rescaled into full-resolution pixels.
FlowField upsample_flow(const FlowField& flow, int stride = kFeatureStride);

Point3D backproject(const Point2D& pixel, double depth, const CameraIntrinsics& k);
Point2D project(const Point3D& point, const CameraIntrinsics& k);

// Checks a batched image tensor [B, 3, H, W] against the pipeline's input
// contract: finite, positive size, divisible by the feature stride.
void check_image(const torch::Tensor& image, const char* name);

}  // namespace dcorr
