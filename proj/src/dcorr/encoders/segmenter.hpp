#pragma once

#include <memory>
#include <string>

#include "dcorr/core/types.hpp"

namespace dcorr {

// Frozen region proposer. segment() takes one image [3,H,W] and returns a
// bool stack [N,H,W] of pairwise-disjoint masks with 1 <= N <= max_regions.
// When nothing is proposed the result is a single full-image mask.
class Segmenter {
 public:
  virtual ~Segmenter() = default;
  virtual torch::Tensor segment(const torch::Tensor& image) const = 0;
  virtual std::string name() const = 0;
};

// Uniform color quantization followed by 4-connected components. Components
// smaller than `min_area` pixels are dropped; the largest `max_regions` kept.
class ColorRegionSegmenter final : public Segmenter {
 public:
  ColorRegionSegmenter(int levels = 4, int min_area = 16, int max_regions = 16);
  torch::Tensor segment(const torch::Tensor& image) const override;
  std::string name() const override { return "color_regions"; }

 private:
  int levels_, min_area_, max_regions_;
};

// Regular rows x cols tiling.
class GridSegmenter final : public Segmenter {
 public:
  GridSegmenter(int rows = 4, int cols = 4);
  torch::Tensor segment(const torch::Tensor& image) const override;
  std::string name() const override { return "grid"; }

 private:
  int rows_, cols_;
};

// Serialized TorchScript module mapping [1,3,H,W] to per-region logits
// [1,N,h',w']. Pixels take the argmax region when its sigmoid exceeds 0.5.
class TorchScriptSegmenter final : public Segmenter {
 public:
  TorchScriptSegmenter(const std::string& path, int max_regions);
  ~TorchScriptSegmenter() override;
  torch::Tensor segment(const torch::Tensor& image) const override;
  std::string name() const override { return "torchscript:" + path_; }

 private:
  struct Impl;
  std::string path_;
  int max_regions_;
  std::unique_ptr<Impl> impl_;
};

struct SegmenterOptions {
  std::string backend = "color_regions";
  int max_regions = 16;
  int levels = 4;
  int min_area = 16;
  int grid_rows = 4;
  int grid_cols = 4;
};

std::unique_ptr<Segmenter> make_segmenter(const SegmenterOptions& options);

// Keeps masks with at least one pixel, largest first (ties by index), at most
// `max_regions`; an empty result becomes one full-image mask.
torch::Tensor finalize_segments(std::vector<torch::Tensor> masks, int64_t h, int64_t w,
                                int max_regions);

}  // namespace dcorr
