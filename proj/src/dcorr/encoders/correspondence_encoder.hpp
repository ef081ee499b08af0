#pragma once

#include <utility>

#include "dcorr/core/types.hpp"

namespace dcorr {

struct EncoderOptions {
  int channels = 128;
  int blocks = 4;
  int heads = 4;
  int stem_channels = 32;
  int mlp_ratio = 2;
};

// Pre-norm transformer block. With `context` equal to the input it is plain
// self-attention; otherwise queries come from `x` and keys/values from
// `context`.
class AttentionBlockImpl : public torch::nn::Module {
 public:
  AttentionBlockImpl(int channels, int heads, int mlp_ratio);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& context);

 private:
  int heads_;
  torch::nn::LayerNorm norm_query_{nullptr}, norm_context_{nullptr}, norm_mlp_{nullptr};
  torch::nn::Linear to_q_{nullptr}, to_k_{nullptr}, to_v_{nullptr}, to_out_{nullptr};
  torch::nn::Linear fc1_{nullptr}, fc2_{nullptr};
};
TORCH_MODULE(AttentionBlock);

// Weight-shared two-branch encoder: a stride-8 residual convolutional stem,
// then blocks alternating self-attention (within an image) and
// cross-attention (between the two images).
class CorrespondenceEncoderImpl : public torch::nn::Module {
 public:
  explicit CorrespondenceEncoderImpl(const EncoderOptions& options = {});

  std::pair<FeatureMap, FeatureMap> forward(const torch::Tensor& image1,
                                            const torch::Tensor& image2);

  const EncoderOptions& options() const { return options_; }
  // The last projection; its parameters are the "final layer".
  torch::nn::Linear head() const { return head_; }

 private:
  EncoderOptions options_;
  torch::nn::Conv2d conv1_{nullptr}, conv1b_{nullptr}, conv2_{nullptr}, conv2b_{nullptr}, proj_{nullptr};
  torch::nn::ModuleList blocks_{nullptr};
  torch::nn::LayerNorm out_norm_{nullptr};
  torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(CorrespondenceEncoder);

// 2D sinusoidal position encoding [h*w, channels]; channels divisible by 4.
torch::Tensor sinusoidal_position_encoding(int64_t h, int64_t w, int64_t channels,
                                           torch::ScalarType dtype);

// Convenience wrapper with the argument checks of the pair contract.
std::pair<FeatureMap, FeatureMap> encode_pair(CorrespondenceEncoder& encoder,
                                              const torch::Tensor& image1,
                                              const torch::Tensor& image2);

int64_t parameter_count(const torch::nn::Module& module);

}  // namespace dcorr
