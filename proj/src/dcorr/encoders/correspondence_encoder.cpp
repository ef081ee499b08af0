#include "dcorr/encoders/correspondence_encoder.hpp"

#include <cmath>

#include "dcorr/core/error.hpp"
#include "dcorr/core/geometry.hpp"

namespace F = torch::nn::functional;

namespace dcorr {

AttentionBlockImpl::AttentionBlockImpl(int channels, int heads, int mlp_ratio) : heads_(heads) {
  if (channels % heads != 0) {
    throw ConfigurationError("encoder: channels must be divisible by the head count");
  }
  norm_query_ = register_module("norm_query", torch::nn::LayerNorm(torch::nn::LayerNormOptions({channels})));
  norm_context_ = register_module("norm_context", torch::nn::LayerNorm(torch::nn::LayerNormOptions({channels})));
  norm_mlp_ = register_module("norm_mlp", torch::nn::LayerNorm(torch::nn::LayerNormOptions({channels})));
  to_q_ = register_module("to_q", torch::nn::Linear(channels, channels));
  to_k_ = register_module("to_k", torch::nn::Linear(channels, channels));
  to_v_ = register_module("to_v", torch::nn::Linear(channels, channels));
  to_out_ = register_module("to_out", torch::nn::Linear(channels, channels));
  fc1_ = register_module("fc1", torch::nn::Linear(channels, channels * mlp_ratio));
  fc2_ = register_module("fc2", torch::nn::Linear(channels * mlp_ratio, channels));
}

torch::Tensor AttentionBlockImpl::forward(const torch::Tensor& x, const torch::Tensor& context) {
  const auto b = x.size(0), n = x.size(1), c = x.size(2);
  const auto m = context.size(1);
  const auto dh = c / heads_;
  auto split = [&](const torch::Tensor& t, int64_t len) {
    return t.view({b, len, heads_, dh}).transpose(1, 2);  // [B, heads, len, dh]
  };
  auto q = split(to_q_(norm_query_(x)), n);
  auto ctx = norm_context_(context);
  auto k = split(to_k_(ctx), m);
  auto v = split(to_v_(ctx), m);
  auto attn = torch::softmax(torch::matmul(q, k.transpose(-2, -1)) / std::sqrt(double(dh)), -1);
  auto mixed = torch::matmul(attn, v).transpose(1, 2).reshape({b, n, c});
  auto y = x + to_out_(mixed);
  return y + fc2_(F::gelu(fc1_(norm_mlp_(y))));
}

CorrespondenceEncoderImpl::CorrespondenceEncoderImpl(const EncoderOptions& options)
    : options_(options) {
  if (options.channels <= 0 || options.channels % 4 != 0 || options.blocks < 0) {
    throw ConfigurationError("encoder: channels must be a positive multiple of 4, blocks >= 0");
  }
  const int s = options.stem_channels;
  auto conv = [](int in, int out, int stride) {
    return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).stride(stride).padding(1));
  };
  conv1_ = register_module("conv1", conv(3, s, 2));
  conv1b_ = register_module("conv1b", conv(s, s, 1));
  conv2_ = register_module("conv2", conv(s, 2 * s, 2));
  conv2b_ = register_module("conv2b", conv(2 * s, 2 * s, 1));
  proj_ = register_module("proj", conv(2 * s, options.channels, 2));
  blocks_ = register_module("blocks", torch::nn::ModuleList());
  for (int i = 0; i < options.blocks; ++i) {
    blocks_->push_back(AttentionBlock(options.channels, options.heads, options.mlp_ratio));
  }
  out_norm_ = register_module("out_norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({options.channels})));
  head_ = register_module("head", torch::nn::Linear(options.channels, options.channels));
}

std::pair<FeatureMap, FeatureMap> CorrespondenceEncoderImpl::forward(const torch::Tensor& image1,
                                                                     const torch::Tensor& image2) {
  const auto b = image1.size(0);
  // Both images go through the same weights as one batch of 2B.
  auto x = (torch::cat({image1, image2}, 0) - 0.5) * 2.0;
  x = F::gelu(conv1_(x));
  x = x + F::gelu(conv1b_(x));
  x = F::gelu(conv2_(x));
  x = x + F::gelu(conv2b_(x));
  x = proj_(x);
  const auto c = x.size(1), h = x.size(2), w = x.size(3);

  auto tokens = x.flatten(2).transpose(1, 2);  // [2B, hw, c]
  tokens = tokens + sinusoidal_position_encoding(h, w, c, tokens.scalar_type()).unsqueeze(0);
  for (size_t i = 0; i < blocks_->size(); ++i) {
    auto block = blocks_[i]->as<AttentionBlock>();
    if (i % 2 == 0) {
      tokens = block->forward(tokens, tokens);
    } else {
      // Image 1 attends to image 2 and vice versa.
      auto swapped = torch::cat({tokens.slice(0, b, 2 * b), tokens.slice(0, 0, b)}, 0);
      tokens = block->forward(tokens, swapped);
    }
  }
  tokens = head_(out_norm_(tokens));
  auto maps = tokens.transpose(1, 2).reshape({2 * b, c, h, w});
  return {FeatureMap{maps.slice(0, 0, b), kFeatureStride},
          FeatureMap{maps.slice(0, b, 2 * b), kFeatureStride}};
}

torch::Tensor sinusoidal_position_encoding(int64_t h, int64_t w, int64_t channels,
                                           torch::ScalarType dtype) {
  const int64_t quarter = channels / 4;
  auto opts = torch::TensorOptions().dtype(dtype);
  auto freq = torch::exp(torch::arange(quarter, opts) * (-std::log(10000.0) / double(quarter)));
  auto ys = torch::arange(h, opts).view({h, 1}).expand({h, w}).reshape({h * w, 1});
  auto xs = torch::arange(w, opts).view({1, w}).expand({h, w}).reshape({h * w, 1});
  auto ax = xs * freq.view({1, quarter});
  auto ay = ys * freq.view({1, quarter});
  return torch::cat({torch::sin(ax), torch::cos(ax), torch::sin(ay), torch::cos(ay)}, 1);
}

std::pair<FeatureMap, FeatureMap> encode_pair(CorrespondenceEncoder& encoder,
                                              const torch::Tensor& image1,
                                              const torch::Tensor& image2) {
  check_image(image1, "encode_pair(I1)");
  check_image(image2, "encode_pair(I2)");
  if (image1.sizes() != image2.sizes()) {
    throw ArgumentError("encode_pair: images must have the same shape");
  }
  return encoder->forward(image1, image2);
}

int64_t parameter_count(const torch::nn::Module& module) {
  int64_t n = 0;
  for (const auto& p : module.parameters()) n += p.numel();
  return n;
}

}  // namespace dcorr
