#pragma once

#include <utility>
#include <vector>

#include "dcorr/core/types.hpp"

namespace dcorr {

// Color-wheel rendering of a flow field ([2,H,W] or [1,2,H,W]): hue encodes
// direction, saturation magnitude relative to `max_magnitude` (the field's
// own maximum when <= 0). Returns [3,H,W] in [0,1].
torch::Tensor flow_to_color(const FlowField& flow, double max_magnitude = 0.0);

// Legend for flow_to_color: displacement (x - c, y - c) at each pixel of a
// size x size square, scaled so the inscribed circle is full saturation.
torch::Tensor color_wheel(int64_t size);

// Pixel pairs (p, p + flow(p)) on a regular grid of the given spacing.
std::vector<std::pair<Point2D, Point2D>> sample_matches(const FlowField& flow, int64_t spacing);

// [3, 2H, 2W] canvas: source | target with sampled matches drawn as lines,
// and below it the flow coloring | its legend.
torch::Tensor correspondence_overlay(const torch::Tensor& source, const torch::Tensor& target,
                                     const FlowField& flow, int64_t spacing = 16);

// Projects both feature maps ([1,c,h,w]) on the top three principal
// components of their union and renders them as colors, upsampled to pixel
// resolution and blended with the images: [3, H, 2W].
torch::Tensor pca_overlay(const torch::Tensor& source, const torch::Tensor& target, const FeatureMap& features1,
                          const FeatureMap& features2);

}  // namespace dcorr
