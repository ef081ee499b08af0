#pragma once

#include "dcorr/encoders/correspondence_encoder.hpp"
#include "dcorr/encoders/semantic_encoder.hpp"
#include "dcorr/matching/matching.hpp"

namespace dcorr {

struct FlowPrediction {
  FlowField full;     // [B,2,H,W], full-resolution pixels
  FlowField feature;  // [B,2,h,w], feature cells
  CostVolume cost;
  CandidateMask mask;
  MatchingDistribution distribution;
  FeatureMap features1, features2;
  FeatureMap semantic1, semantic2;
};

// encode_pair -> cost_volume -> candidate_mask on semantic features ->
// masked_softmax -> flow_from_distribution -> upsample_flow.
FlowPrediction predict_flow(CorrespondenceEncoder& encoder, const SemanticEncoder& semantic,
                            double candidate_fraction, const torch::Tensor& image1,
                            const torch::Tensor& image2);

}  // namespace dcorr
