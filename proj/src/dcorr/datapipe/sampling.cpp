#include "dcorr/datapipe/sampling.hpp"

#include <cmath>

#include "dcorr/core/error.hpp"
#include "dcorr/datapipe/image_io.hpp"

namespace dcorr {

Rng make_rng(uint64_t seed, uint64_t worker, uint64_t step) {
  std::seed_seq seq{uint32_t(seed), uint32_t(seed >> 32), uint32_t(worker), uint32_t(step),
                    uint32_t(step >> 32)};
  return Rng(seq);
}

std::pair<int64_t, int64_t> frame_gap_bounds(double fps, const IntervalRange& interval) {
  if (!(fps > 0.0)) throw ArgumentError("frame_gap_bounds: fps must be positive");
  if (!(interval.min_seconds > 0.0) || interval.max_seconds < interval.min_seconds) {
    throw ArgumentError("frame_gap_bounds: invalid interval range");
  }
  const auto lo = std::max<int64_t>(1, int64_t(std::floor(interval.min_seconds * fps + 1e-9)));
  const auto hi = std::max<int64_t>(lo, int64_t(std::floor(interval.max_seconds * fps + 1e-9)));
  return {lo, hi};
}

FramePairIndex sample_pair_indices(const VideoEntry& video, const IntervalRange& interval, Rng& rng) {
  const auto n = int64_t(video.frame_paths.size());
  auto [lo, hi] = frame_gap_bounds(video.fps, interval);
  if (n - 1 < lo) {
    throw DataError("sample_pair: video '" + video.id + "' has " + std::to_string(n) +
                    " frames, too short for a gap of " + std::to_string(lo));
  }
  hi = std::min(hi, n - 1);
  FramePairIndex out;
  out.gap = std::uniform_int_distribution<int64_t>(lo, hi)(rng);
  out.first = std::uniform_int_distribution<int64_t>(0, n - 1 - out.gap)(rng);
  out.second = out.first + out.gap;
  return out;
}

std::pair<torch::Tensor, torch::Tensor> sample_pair(const VideoEntry& video, const IntervalRange& interval,
                                                    Rng& rng) {
  const auto idx = sample_pair_indices(video, interval, rng);
  return {load_image(video.frame_paths[size_t(idx.first)]), load_image(video.frame_paths[size_t(idx.second)])};
}

std::pair<torch::Tensor, torch::Tensor> random_crop_pair(const torch::Tensor& image1,
                                                         const torch::Tensor& image2, int64_t height,
                                                         int64_t width, Rng& rng, bool shared_offset) {
  if (image1.dim() != 3 || image2.dim() != 3) throw ArgumentError("random_crop_pair: expected [3,H,W] frames");
  if (height <= 0 || width <= 0 || height % kFeatureStride != 0 || width % kFeatureStride != 0) {
    throw ArgumentError("random_crop_pair: crop size must be positive and divisible by 8");
  }
  for (const auto* img : {&image1, &image2}) {
    if (img->size(1) < height || img->size(2) < width) {
      throw ArgumentError("random_crop_pair: crop " + std::to_string(height) + "x" + std::to_string(width) +
                          " exceeds frame " + std::to_string(img->size(1)) + "x" + std::to_string(img->size(2)));
    }
  }
  auto offset = [&](const torch::Tensor& img) {
    const auto y = std::uniform_int_distribution<int64_t>(0, img.size(1) - height)(rng);
    const auto x = std::uniform_int_distribution<int64_t>(0, img.size(2) - width)(rng);
    return std::pair{y, x};
  };
  const auto o1 = offset(image1);
  const auto o2 = shared_offset ? o1 : offset(image2);
  auto crop = [&](const torch::Tensor& img, std::pair<int64_t, int64_t> o) {
    return img.slice(1, o.first, o.first + height).slice(2, o.second, o.second + width).contiguous();
  };
  return {crop(image1, o1), crop(image2, o2)};
}

torch::Tensor resize_shorter_side(const torch::Tensor& image, int64_t shorter) {
  const auto h = image.size(1), w = image.size(2);
  const double scale = double(shorter) / double(std::min(h, w));
  const auto nh = std::max<int64_t>(shorter, int64_t(std::llround(double(h) * scale)));
  const auto nw = std::max<int64_t>(shorter, int64_t(std::llround(double(w) * scale)));
  return resize_image(image, h <= w ? shorter : nh, w < h ? shorter : nw);
}

}  // namespace dcorr
