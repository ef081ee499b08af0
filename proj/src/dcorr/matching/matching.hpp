#pragma once

#include <cstdint>

#include "dcorr/core/types.hpp"

namespace dcorr {

inline constexpr double kDefaultCandidateFraction = 0.01;

// C[b, i, j, k, l] = <f1[b,:,i,j], f2[b,:,k,l]> / sqrt(c), shape [B,h,w,h,w].
struct CostVolume {
  torch::Tensor data;
};

// Bool [B,h,w,h,w]; every source cell has exactly candidates_per_cell entries.
struct CandidateMask {
  torch::Tensor data;
  double fraction = kDefaultCandidateFraction;
  int64_t candidates_per_cell = 1;
};

// Non-negative [B,h,w,h,w]; each source row sums to one over its candidates.
struct MatchingDistribution {
  torch::Tensor data;
};

CostVolume cost_volume(const FeatureMap& f1, const FeatureMap& f2);

// max(1, ceil(fraction * cells)).
int64_t candidates_per_cell(double fraction, int64_t cells);

// Marks, for every source cell, the target cells with the highest cosine
// similarity of semantic features. Ties resolve to the smaller row-major
// index. Computed without gradient.
CandidateMask candidate_mask(const FeatureMap& fs1, const FeatureMap& fs2, double fraction);

MatchingDistribution masked_softmax(const CostVolume& cost, const CandidateMask& mask);

// Expected target coordinate minus source coordinate, in feature cells.
FlowField flow_from_distribution(const MatchingDistribution& distribution, const PixelGrid& grid);

}  // namespace dcorr
