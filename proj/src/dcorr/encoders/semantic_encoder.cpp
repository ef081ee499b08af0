#include "dcorr/encoders/semantic_encoder.hpp"

#include <torch/script.h>

#include <cmath>
#include <random>

#include "dcorr/core/error.hpp"
#include "dcorr/core/geometry.hpp"

namespace F = torch::nn::functional;

namespace dcorr {

HandcraftedSemanticEncoder::HandcraftedSemanticEncoder(const HandcraftedSemanticOptions& options)
    : options_(options) {
  if (options.channels <= 0 || options.histogram_bins <= 0) {
    throw ConfigurationError("semantic encoder: channels and histogram bins must be positive");
  }
  const int raw_dim = 3 + 3 * options.histogram_bins + 2;
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(double(raw_dim)));
  projection_ = torch::empty({options.channels, raw_dim}, torch::kFloat64);
  auto acc = projection_.accessor<double, 2>();
  for (int i = 0; i < options.channels; ++i)
    for (int j = 0; j < raw_dim; ++j) acc[i][j] = normal(rng);
  projection_ = projection_.to(torch::kFloat32);
}

FeatureMap HandcraftedSemanticEncoder::features(const torch::Tensor& images) const {
  check_image(images, "semantic_features");
  const int bins = options_.histogram_bins;
  const auto b = images.size(0), hh = images.size(2), ww = images.size(3);
  const auto h = hh / kFeatureStride, w = ww / kFeatureStride;
  auto img = images.detach().to(torch::kFloat32);
  auto pool = [](const torch::Tensor& t) { return F::avg_pool2d(t, F::AvgPool2dFuncOptions(kFeatureStride)); };

  auto mean_color = pool(img) - 0.5;
  auto bin_index = (img * bins).floor().clamp(0, bins - 1).to(torch::kLong);  // [B,3,H,W]
  auto one_hot = F::one_hot(bin_index, bins)                                  // [B,3,H,W,bins]
                     .permute({0, 1, 4, 2, 3})
                     .reshape({b, 3 * bins, hh, ww})
                     .to(torch::kFloat32);
  auto histogram = pool(one_hot) - 1.0 / bins;
  auto grid = make_pixel_grid(h, w).coords.permute({2, 0, 1});  // [2,h,w]
  auto scale = torch::tensor({1.0f / float(w), 1.0f / float(h)}).view({2, 1, 1});
  auto position = ((grid + 0.5) * scale - 0.5) * options_.position_weight;
  position = position.unsqueeze(0).expand({b, 2, h, w});

  auto raw = torch::cat({mean_color, histogram, position}, 1);  // [B,d,h,w]
  auto out = torch::einsum("od,bdhw->bohw", {projection_, raw});
  return FeatureMap{out.detach().to(images.scalar_type()), kFeatureStride};
}

struct TorchScriptSemanticEncoder::Impl {
  mutable torch::jit::script::Module module;
};

TorchScriptSemanticEncoder::TorchScriptSemanticEncoder(const std::string& path)
    : path_(path), impl_(std::make_unique<Impl>()) {
  try {
    impl_->module = torch::jit::load(path);
  } catch (const std::exception& e) {
    throw ConfigurationError("semantic backend unavailable: cannot load TorchScript module '" +
                             path + "': " + e.what());
  }
  impl_->module.eval();
  for (auto p : impl_->module.parameters()) p.set_requires_grad(false);
}

TorchScriptSemanticEncoder::~TorchScriptSemanticEncoder() = default;

FeatureMap TorchScriptSemanticEncoder::features(const torch::Tensor& images) const {
  check_image(images, "semantic_features");
  torch::NoGradGuard no_grad;
  const auto h = images.size(2) / kFeatureStride, w = images.size(3) / kFeatureStride;
  auto mean = torch::tensor({0.485f, 0.456f, 0.406f}).view({1, 3, 1, 1});
  auto std = torch::tensor({0.229f, 0.224f, 0.225f}).view({1, 3, 1, 1});
  auto input = (images.detach().to(torch::kFloat32) - mean) / std;
  torch::Tensor out;
  try {
    out = impl_->module.forward({input}).toTensor();
  } catch (const std::exception& e) {
    throw ConfigurationError("semantic backend failed: " + std::string(e.what()));
  }
  if (out.dim() != 4 || out.size(0) != images.size(0)) {
    throw ConfigurationError("semantic backend returned an unexpected shape");
  }
  if (out.size(2) != h || out.size(3) != w) {
    out = F::interpolate(out, F::InterpolateFuncOptions()
                                  .size(std::vector<int64_t>{h, w})
                                  .mode(torch::kBilinear)
                                  .align_corners(false));
  }
  return FeatureMap{out.detach().to(images.scalar_type()).contiguous(), kFeatureStride};
}

std::vector<torch::Tensor> TorchScriptSemanticEncoder::frozen_parameters() const {
  std::vector<torch::Tensor> params;
  for (const auto& p : impl_->module.parameters()) params.push_back(p);
  return params;
}

std::unique_ptr<SemanticEncoder> make_semantic_encoder(const std::string& backend,
                                                       const HandcraftedSemanticOptions& options) {
  if (backend == "handcrafted") return std::make_unique<HandcraftedSemanticEncoder>(options);
  const std::string prefix = "torchscript:";
  if (backend.rfind(prefix, 0) == 0) {
    return std::make_unique<TorchScriptSemanticEncoder>(backend.substr(prefix.size()));
  }
  throw ConfigurationError("unknown semantic.backend '" + backend + "'");
}

FeatureMap semantic_features(const SemanticEncoder& encoder, const torch::Tensor& images) {
  return encoder.features(images);
}

}  // namespace dcorr
