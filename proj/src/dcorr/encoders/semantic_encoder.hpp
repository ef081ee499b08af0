#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dcorr/core/types.hpp"

namespace dcorr {

// Frozen per-image feature extractor. Outputs are detached from any graph and
// resampled to the stride-8 grid of the input.
class SemanticEncoder {
 public:
  virtual ~SemanticEncoder() = default;
  virtual FeatureMap features(const torch::Tensor& images) const = 0;
  virtual std::string name() const = 0;
  // Tensors whose values must never change during training.
  virtual std::vector<torch::Tensor> frozen_parameters() const { return {}; }
};

struct HandcraftedSemanticOptions {
  int channels = 64;
  int histogram_bins = 4;
  double position_weight = 0.25;
  uint64_t seed = 7;
};

// Deterministic stand-in for a pretrained encoder: per-cell mean color,
// per-channel color histogram and normalized position, centered and randomly
// projected to `channels` dimensions.
class HandcraftedSemanticEncoder final : public SemanticEncoder {
 public:
  explicit HandcraftedSemanticEncoder(const HandcraftedSemanticOptions& options = {});
  FeatureMap features(const torch::Tensor& images) const override;
  std::string name() const override { return "handcrafted"; }
  std::vector<torch::Tensor> frozen_parameters() const override { return {projection_}; }

  // Exposed so gradient probes can flip requires_grad on the projection.
  torch::Tensor& projection() { return projection_; }

 private:
  HandcraftedSemanticOptions options_;
  torch::Tensor projection_;  // [channels, raw_dim]
};

// Wraps a serialized TorchScript module mapping [B,3,H,W] (ImageNet
// normalized) to [B,c',h',w']; the output is bilinearly resized to H/8 x W/8.
class TorchScriptSemanticEncoder final : public SemanticEncoder {
 public:
  explicit TorchScriptSemanticEncoder(const std::string& path);
  ~TorchScriptSemanticEncoder() override;
  FeatureMap features(const torch::Tensor& images) const override;
  std::string name() const override { return "torchscript:" + path_; }
  std::vector<torch::Tensor> frozen_parameters() const override;

 private:
  struct Impl;
  std::string path_;
  std::unique_ptr<Impl> impl_;
};

// "handcrafted" or "torchscript:<path>"; anything else is a configuration
// error, as is a TorchScript file that cannot be loaded.
std::unique_ptr<SemanticEncoder> make_semantic_encoder(const std::string& backend,
                                                       const HandcraftedSemanticOptions& options = {});

FeatureMap semantic_features(const SemanticEncoder& encoder, const torch::Tensor& images);

}  // namespace dcorr
