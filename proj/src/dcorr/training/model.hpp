#pragma once

#include <memory>

#include "dcorr/encoders/segmenter.hpp"
#include "dcorr/matching/predict.hpp"
#include "dcorr/training/config.hpp"

namespace dcorr {

// The trainable encoder together with the frozen semantic encoder and
// segmenter it is trained against.
class CorrespondenceModel {
 public:
  // Seeds torch with config.seed before building the encoder, so two models
  // built from one config start from identical weights.
  explicit CorrespondenceModel(const PipelineConfig& config);

  const PipelineConfig& config() const { return config_; }
  CorrespondenceEncoder& encoder() { return encoder_; }
  const CorrespondenceEncoder& encoder() const { return encoder_; }
  SemanticEncoder& semantic() { return *semantic_; }
  const SemanticEncoder& semantic() const { return *semantic_; }
  const Segmenter& segmenter() const { return *segmenter_; }

  // Full forward pass with autograd enabled.
  FlowPrediction predict(const torch::Tensor& image1, const torch::Tensor& image2);

  // Inference: no graph, encoder in eval mode, full-resolution flow only.
  // Image sides must be multiples of 8.
  FlowField infer(const torch::Tensor& image1, const torch::Tensor& image2);

  // Moves the encoder to `dtype` (used by the finite-difference checks).
  void to(torch::ScalarType dtype);

 private:
  PipelineConfig config_;
  CorrespondenceEncoder encoder_{nullptr};
  std::unique_ptr<SemanticEncoder> semantic_;
  std::unique_ptr<Segmenter> segmenter_;
};

// FNV-1a over the raw bytes of every tensor, in order. Used to audit that
// frozen components do not change.
uint64_t tensor_checksum(const std::vector<torch::Tensor>& tensors);

}  // namespace dcorr
