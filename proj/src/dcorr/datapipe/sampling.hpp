#pragma once

#include <cstdint>
#include <random>
#include <utility>

#include "dcorr/core/types.hpp"
#include "dcorr/datapipe/video_index.hpp"

namespace dcorr {

using Rng = std::mt19937_64;

// Deterministic generator for a (seed, worker, step) triple.
Rng make_rng(uint64_t seed, uint64_t worker, uint64_t step);

struct IntervalRange {
  double min_seconds = 1.0;
  double max_seconds = 3.0;
};

// Inclusive frame-gap bounds floor(min * fps) .. floor(max * fps).
std::pair<int64_t, int64_t> frame_gap_bounds(double fps, const IntervalRange& interval);

struct FramePairIndex {
  int64_t first = 0;   // position in the video's frame list
  int64_t second = 0;
  int64_t gap = 0;
};

// Uniform gap within the bounds (capped by the video length), then a uniform
// start frame. Throws DataError when the video cannot fit the minimum gap.
FramePairIndex sample_pair_indices(const VideoEntry& video, const IntervalRange& interval, Rng& rng);

// Loads the two sampled frames as [3,H,W] tensors.
std::pair<torch::Tensor, torch::Tensor> sample_pair(const VideoEntry& video, const IntervalRange& interval,
                                                    Rng& rng);

// Crops both [3,H,W] frames to height x width. Offsets are drawn
// independently unless `shared_offset` is set.
std::pair<torch::Tensor, torch::Tensor> random_crop_pair(const torch::Tensor& image1,
                                                         const torch::Tensor& image2, int64_t height,
                                                         int64_t width, Rng& rng,
                                                         bool shared_offset = false);

// Resizes a [3,H,W] frame so its shorter side equals `shorter`.
torch::Tensor resize_shorter_side(const torch::Tensor& image, int64_t shorter);

}  // namespace dcorr
