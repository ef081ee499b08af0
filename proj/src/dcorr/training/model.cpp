#include "dcorr/training/model.hpp"

#include "dcorr/core/error.hpp"

namespace dcorr {

CorrespondenceModel::CorrespondenceModel(const PipelineConfig& config) : config_(config) {
  torch::manual_seed(config.seed);
  encoder_ = CorrespondenceEncoder(config.encoder);
  semantic_ = make_semantic_encoder(config.semantic.backend, config.semantic.handcrafted);
  segmenter_ = make_segmenter(config.segmenter);
}

FlowPrediction CorrespondenceModel::predict(const torch::Tensor& image1, const torch::Tensor& image2) {
  return predict_flow(encoder_, *semantic_, config_.candidate_fraction, image1, image2);
}

FlowField CorrespondenceModel::infer(const torch::Tensor& image1, const torch::Tensor& image2) {
  torch::NoGradGuard no_grad;
  const bool was_training = encoder_->is_training();
  encoder_->eval();
  auto dtype = encoder_->parameters().front().scalar_type();
  auto out = predict(image1.to(dtype), image2.to(dtype)).full;
  encoder_->train(was_training);
  return out;
}

void CorrespondenceModel::to(torch::ScalarType dtype) { encoder_->to(dtype); }

uint64_t tensor_checksum(const std::vector<torch::Tensor>& tensors) {
  uint64_t h = 1469598103934665603ull;
  for (const auto& t : tensors) {
    auto c = t.detach().contiguous().cpu();
    const auto* bytes = static_cast<const unsigned char*>(c.data_ptr());
    const auto n = c.numel() * int64_t(c.element_size());
    for (int64_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  }
  return h;
}

}  // namespace dcorr
