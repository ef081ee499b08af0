#pragma once

#include <cstdint>

#include "dcorr/core/types.hpp"

namespace dcorr {

struct CharbonnierParams {
  double eps = 1e-3;
  double alpha = 0.5;
};

// psi(x) = (x^2 + eps^2)^alpha, elementwise.
torch::Tensor charbonnier(const torch::Tensor& x, const CharbonnierParams& p = {});
double charbonnier(double x, const CharbonnierParams& p = {});

// Which 4-neighbor pairs the distance-consistency term looks at.
enum class PairRule {
  WithinRegion,    // both endpoints in the same segment
  UnionOfRegions,  // both endpoints in some segment, possibly different ones
};

struct LossWeights {
  double photometric = 1.0;
  double feature_metric = 1.0;
  double distance = 1.0;
};

struct LossOptions {
  CharbonnierParams charbonnier;
  LossWeights weights;
  PairRule pair_rule = PairRule::WithinRegion;
  // Replaces the distance-consistency term by a first-order smoothness penalty.
  bool smoothness_ablation = false;
};

// A feature cell is set iff more than half of its stride x stride pixels are.
// `mask` is [B,H,W] or [H,W] bool.
torch::Tensor downsample_mask(const torch::Tensor& mask, int stride = kFeatureStride);

// Majority-rule region label per feature cell ([N,H,W] -> [h,w] int64,
// -1 where no segment covers the majority of the cell).
torch::Tensor downsample_regions(const torch::Tensor& segments, int stride = kFeatureStride);

// Each returns a scalar tensor: the mean over batch elements of the per-element
// masked mean. Masks are bool [B,H,W] (full) or [B,h,w] (feature).
torch::Tensor photometric_loss(const torch::Tensor& image1, const torch::Tensor& image2,
                               const FlowField& flow_full, const torch::Tensor& mask,
                               const CharbonnierParams& p = {});
torch::Tensor feature_metric_loss(const FeatureMap& semantic1, const FeatureMap& semantic2,
                                  const FlowField& flow_feature, const torch::Tensor& mask,
                                  const CharbonnierParams& p = {});
// `regions` is [B,h,w] int64 labels (see downsample_regions).
torch::Tensor distance_consistency_loss(const FlowField& flow_feature, const torch::Tensor& regions,
                                        const CharbonnierParams& p = {},
                                        PairRule rule = PairRule::WithinRegion);
torch::Tensor smoothness_loss(const FlowField& flow_feature, const CharbonnierParams& p = {});

struct LossInputs {
  torch::Tensor image1, image2;   // [B,3,H,W]
  FlowField flow_full;            // [B,2,H,W]
  FlowField flow_feature;         // [B,2,h,w]
  FeatureMap semantic1, semantic2;
  torch::Tensor visible_mask;     // bool [B,H,W]
  torch::Tensor regions;          // int64 [B,h,w]
};

struct LossBreakdown {
  torch::Tensor total;  // differentiable weighted sum
  double photometric = 0.0;
  double feature_metric = 0.0;
  double distance = 0.0;
  double value = 0.0;
  int64_t photometric_pixels = 0;
  int64_t feature_cells = 0;
  int64_t distance_pairs = 0;
};

// Weighted sum of the three terms. Terms with zero weight are evaluated for
// logging only. Throws TrainingError when any term is non-finite.
LossBreakdown total_loss(const LossInputs& in, const LossOptions& options);

}  // namespace dcorr
