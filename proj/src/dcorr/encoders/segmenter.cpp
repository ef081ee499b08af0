#include "dcorr/encoders/segmenter.hpp"

#include <torch/script.h>

#include <algorithm>
#include <deque>
#include <numeric>

#include "dcorr/core/error.hpp"

namespace dcorr {
namespace {

void check_single_image(const torch::Tensor& image) {
  if (image.dim() != 3 || image.size(0) != 3 || image.size(1) < 1 || image.size(2) < 1) {
    throw ArgumentError("segment: expected image tensor [3,H,W]");
  }
}

}  // namespace

torch::Tensor finalize_segments(std::vector<torch::Tensor> masks, int64_t h, int64_t w,
                                int max_regions) {
  std::vector<int64_t> area;
  std::vector<torch::Tensor> kept;
  for (auto& m : masks) {
    const auto a = m.sum().item<int64_t>();
    if (a > 0) {
      kept.push_back(m);
      area.push_back(a);
    }
  }
  std::vector<size_t> order(kept.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return area[a] > area[b]; });
  if (max_regions > 0 && order.size() > size_t(max_regions)) order.resize(size_t(max_regions));
  if (order.empty()) return torch::ones({1, h, w}, torch::kBool);
  std::vector<torch::Tensor> out;
  for (auto i : order) out.push_back(kept[i]);
  return torch::stack(out, 0);
}

ColorRegionSegmenter::ColorRegionSegmenter(int levels, int min_area, int max_regions)
    : levels_(levels), min_area_(min_area), max_regions_(max_regions) {
  if (levels < 1 || max_regions < 1) {
    throw ConfigurationError("color_regions segmenter: levels and max_regions must be >= 1");
  }
}

torch::Tensor ColorRegionSegmenter::segment(const torch::Tensor& image) const {
  check_single_image(image);
  const int64_t h = image.size(1), w = image.size(2);
  auto q = (image.detach().to(torch::kFloat32) * levels_).floor().clamp(0, levels_ - 1).to(torch::kInt32);
  auto code = (q[0] * levels_ * levels_ + q[1] * levels_ + q[2]).contiguous();
  const int32_t* c = code.data_ptr<int32_t>();

  std::vector<int32_t> label(size_t(h * w), -1);
  std::vector<std::vector<int64_t>> components;
  std::deque<int64_t> queue;
  for (int64_t start = 0; start < h * w; ++start) {
    if (label[start] >= 0) continue;
    const auto id = int32_t(components.size());
    components.emplace_back();
    label[start] = id;
    queue.push_back(start);
    while (!queue.empty()) {
      const auto p = queue.front();
      queue.pop_front();
      components.back().push_back(p);
      const int64_t y = p / w, x = p % w;
      const int64_t nbrs[4][2] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
      for (const auto& n : nbrs) {
        if (n[0] < 0 || n[0] >= h || n[1] < 0 || n[1] >= w) continue;
        const auto np = n[0] * w + n[1];
        if (label[np] < 0 && c[np] == c[p]) {
          label[np] = id;
          queue.push_back(np);
        }
      }
    }
  }

  std::vector<torch::Tensor> masks;
  for (const auto& comp : components) {
    if (int64_t(comp.size()) < min_area_) continue;
    auto m = torch::zeros({h * w}, torch::kBool);
    auto acc = m.accessor<bool, 1>();
    for (auto p : comp) acc[p] = true;
    masks.push_back(m.view({h, w}));
  }
  return finalize_segments(std::move(masks), h, w, max_regions_);
}

GridSegmenter::GridSegmenter(int rows, int cols) : rows_(rows), cols_(cols) {
  if (rows < 1 || cols < 1) throw ConfigurationError("grid segmenter: rows and cols must be >= 1");
}

torch::Tensor GridSegmenter::segment(const torch::Tensor& image) const {
  check_single_image(image);
  const int64_t h = image.size(1), w = image.size(2);
  std::vector<torch::Tensor> masks;
  for (int r = 0; r < rows_; ++r) {
    for (int c = 0; c < cols_; ++c) {
      auto m = torch::zeros({h, w}, torch::kBool);
      m.slice(0, h * r / rows_, h * (r + 1) / rows_).slice(1, w * c / cols_, w * (c + 1) / cols_).fill_(true);
      masks.push_back(m);
    }
  }
  return finalize_segments(std::move(masks), h, w, rows_ * cols_);
}

struct TorchScriptSegmenter::Impl {
  mutable torch::jit::script::Module module;
};

TorchScriptSegmenter::TorchScriptSegmenter(const std::string& path, int max_regions)
    : path_(path), max_regions_(max_regions), impl_(std::make_unique<Impl>()) {
  try {
    impl_->module = torch::jit::load(path);
  } catch (const std::exception& e) {
    throw ConfigurationError("segmenter backend unavailable: cannot load TorchScript module '" +
                             path + "': " + e.what());
  }
  impl_->module.eval();
}

TorchScriptSegmenter::~TorchScriptSegmenter() = default;

torch::Tensor TorchScriptSegmenter::segment(const torch::Tensor& image) const {
  check_single_image(image);
  torch::NoGradGuard no_grad;
  const int64_t h = image.size(1), w = image.size(2);
  torch::Tensor logits;
  try {
    logits = impl_->module.forward({image.detach().to(torch::kFloat32).unsqueeze(0)}).toTensor();
  } catch (const std::exception& e) {
    throw ConfigurationError("segmenter backend failed: " + std::string(e.what()));
  }
  if (logits.dim() != 4 || logits.size(0) != 1) {
    throw ConfigurationError("segmenter backend returned an unexpected shape");
  }
  if (logits.size(2) != h || logits.size(3) != w) {
    namespace F = torch::nn::functional;
    logits = F::interpolate(logits, F::InterpolateFuncOptions()
                                        .size(std::vector<int64_t>{h, w})
                                        .mode(torch::kBilinear)
                                        .align_corners(false));
  }
  auto [best, index] = logits[0].max(0);
  auto confident = torch::sigmoid(best) > 0.5;
  std::vector<torch::Tensor> masks;
  for (int64_t n = 0; n < logits.size(1); ++n) masks.push_back((index == n) & confident);
  return finalize_segments(std::move(masks), h, w, max_regions_);
}

std::unique_ptr<Segmenter> make_segmenter(const SegmenterOptions& options) {
  if (options.backend == "color_regions") {
    return std::make_unique<ColorRegionSegmenter>(options.levels, options.min_area, options.max_regions);
  }
  if (options.backend == "grid") {
    return std::make_unique<GridSegmenter>(options.grid_rows, options.grid_cols);
  }
  const std::string prefix = "torchscript:";
  if (options.backend.rfind(prefix, 0) == 0) {
    return std::make_unique<TorchScriptSegmenter>(options.backend.substr(prefix.size()),
                                                  options.max_regions);
  }
  throw ConfigurationError("unknown segmenter.backend '" + options.backend + "'");
}

}  // namespace dcorr
