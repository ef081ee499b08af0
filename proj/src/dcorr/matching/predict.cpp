#include "dcorr/matching/predict.hpp"

#include "dcorr/core/geometry.hpp"

namespace dcorr {

FlowPrediction predict_flow(CorrespondenceEncoder& encoder, const SemanticEncoder& semantic,
                            double candidate_fraction, const torch::Tensor& image1,
                            const torch::Tensor& image2) {
  FlowPrediction out;
  std::tie(out.features1, out.features2) = encode_pair(encoder, image1, image2);
  out.semantic1 = semantic.features(image1);
  out.semantic2 = semantic.features(image2);
  out.cost = cost_volume(out.features1, out.features2);
  out.mask = candidate_mask(out.semantic1, out.semantic2, candidate_fraction);
  out.distribution = masked_softmax(out.cost, out.mask);
  auto grid = make_pixel_grid(out.features1.height(), out.features1.width(),
                              out.features1.data.scalar_type());
  out.feature = flow_from_distribution(out.distribution, grid);
  out.full = upsample_flow(out.feature, kFeatureStride);
  return out;
}

}  // namespace dcorr
