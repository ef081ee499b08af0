#pragma once

#include <cstdint>
#include <vector>

#include "dcorr/matching/matching.hpp"

namespace dcorr {

inline constexpr int kDefaultTopK = 3;

// Per-pixel best match score [B,H,W], detached.
struct SimilarityMap {
  torch::Tensor data;
};

struct VisibleRegionMask {
  torch::Tensor data;             // bool [H,W]
  std::vector<int64_t> selected;  // indices into the segment stack, best first
  bool fallback = false;          // true when the full image was used
};

// Max of every cost-volume row over the target cells, replicated over each
// cell's stride x stride pixel block.
SimilarityMap max_similarity_map(const CostVolume& cost, int stride = kFeatureStride);

// Mean of `similarity` [H,W] over each mask of `masks` [N,H,W]; empty masks
// score -infinity. Throws DataError when every mask is empty.
std::vector<double> segment_scores(const torch::Tensor& similarity, const torch::Tensor& masks);

// Union of the min(k, N) best-scoring segments. Ties prefer the larger segment,
// then the lower index. With at most one non-empty segment the whole image is
// returned instead.
VisibleRegionMask select_visible_regions(const torch::Tensor& masks, const std::vector<double>& scores,
                                         int k);

}  // namespace dcorr
