#include "dcorr/losses/losses.hpp"

#include <cmath>
#include <sstream>

#include "dcorr/core/error.hpp"
#include "dcorr/core/geometry.hpp"
#include "dcorr/core/log.hpp"

namespace F = torch::nn::functional;

namespace dcorr {
namespace {

// floor + mean(values - floor) over the mask, per batch element, then averaged
// over the batch. Writing it relative to the floor keeps the minimum exact.
torch::Tensor masked_mean_over_floor(const torch::Tensor& values, const torch::Tensor& mask,
                                     double floor, const char* op) {
  const auto b = values.size(0);
  auto v = values.reshape({b, -1});
  auto m = mask.reshape({b, -1}).to(values.scalar_type());
  auto counts = m.sum(1);
  if ((counts == 0).any().item<bool>()) {
    throw ArgumentError(std::string(op) + ": empty loss mask for a batch element");
  }
  auto per_element = floor + ((v - floor) * m).sum(1) / counts;
  return per_element.mean();
}

torch::Tensor as_batched_mask(const torch::Tensor& mask, int64_t b, int64_t h, int64_t w,
                              const char* op) {
  auto m = mask.dim() == 2 ? mask.unsqueeze(0) : mask;
  if (m.dim() != 3 || m.size(0) != b || m.size(1) != h || m.size(2) != w) {
    throw ArgumentError(std::string(op) + ": mask shape does not match the loss raster");
  }
  return m.to(torch::kBool);
}

}  // namespace

torch::Tensor charbonnier(const torch::Tensor& x, const CharbonnierParams& p) {
  return torch::pow(x * x + p.eps * p.eps, p.alpha);
}

double charbonnier(double x, const CharbonnierParams& p) {
  return std::pow(x * x + p.eps * p.eps, p.alpha);
}

torch::Tensor downsample_mask(const torch::Tensor& mask, int stride) {
  const bool single = mask.dim() == 2;
  auto m = (single ? mask.unsqueeze(0) : mask).to(torch::kFloat32).unsqueeze(1);
  auto frac = F::avg_pool2d(m, F::AvgPool2dFuncOptions(stride)).squeeze(1);
  auto out = frac > 0.5;
  return single ? out[0] : out;
}

torch::Tensor downsample_regions(const torch::Tensor& segments, int stride) {
  if (segments.dim() != 3) throw ArgumentError("downsample_regions: expected segments [N,H,W]");
  auto frac = F::avg_pool2d(segments.to(torch::kFloat32).unsqueeze(1), F::AvgPool2dFuncOptions(stride))
                  .squeeze(1);  // [N,h,w]
  auto [best, index] = frac.max(0);
  return torch::where(best > 0.5, index, torch::full_like(index, -1));
}

torch::Tensor photometric_loss(const torch::Tensor& image1, const torch::Tensor& image2,
                               const FlowField& flow_full, const torch::Tensor& mask,
                               const CharbonnierParams& p) {
  if (image1.sizes() != image2.sizes() || image1.dim() != 4) {
    throw ArgumentError("photometric_loss: images must share shape [B,C,H,W]");
  }
  const auto b = image1.size(0), h = image1.size(2), w = image1.size(3);
  auto m = as_batched_mask(mask, b, h, w, "photometric_loss");
  auto warped = warp_by_flow(image2, flow_full);
  auto penalty = charbonnier(image1 - warped, p).mean(1);  // over channels
  return masked_mean_over_floor(penalty, m, charbonnier(0.0, p), "photometric_loss");
}

torch::Tensor feature_metric_loss(const FeatureMap& semantic1, const FeatureMap& semantic2,
                                  const FlowField& flow_feature, const torch::Tensor& mask,
                                  const CharbonnierParams& p) {
  if (semantic1.data.sizes() != semantic2.data.sizes()) {
    throw ArgumentError("feature_metric_loss: semantic maps differ in shape");
  }
  const auto b = semantic1.data.size(0), h = semantic1.height(), w = semantic1.width();
  auto m = as_batched_mask(mask, b, h, w, "feature_metric_loss");
  auto s1 = semantic1.data.detach();
  auto warped = warp_by_flow(semantic2.data.detach(), flow_feature);
  auto penalty = charbonnier(s1 - warped, p).mean(1);
  return masked_mean_over_floor(penalty, m, charbonnier(0.0, p), "feature_metric_loss");
}

namespace {

// Qualifying-pair masks for horizontal [B,h,w-1] and vertical [B,h-1,w] pairs.
std::pair<torch::Tensor, torch::Tensor> pair_masks(const torch::Tensor& regions, PairRule rule) {
  auto qualifies = [&](const torch::Tensor& a, const torch::Tensor& b) {
    auto both = (a >= 0) & (b >= 0);
    return rule == PairRule::WithinRegion ? both & (a == b) : both;
  };
  const auto w = regions.size(2), h = regions.size(1);
  return {qualifies(regions.slice(2, 0, w - 1), regions.slice(2, 1, w)),
          qualifies(regions.slice(1, 0, h - 1), regions.slice(1, 1, h))};
}

}  // namespace

torch::Tensor distance_consistency_loss(const FlowField& flow_feature, const torch::Tensor& regions,
                                        const CharbonnierParams& p, PairRule rule) {
  const auto& f = flow_feature.data;
  if (f.dim() != 4 || f.size(1) != 2) throw ArgumentError("distance_consistency_loss: expected flow [B,2,h,w]");
  const auto b = f.size(0), h = f.size(2), w = f.size(3);
  if (regions.dim() != 3 || regions.size(0) != b || regions.size(1) != h || regions.size(2) != w) {
    throw ArgumentError("distance_consistency_loss: regions must be [B,h,w]");
  }
  const double floor = charbonnier(0.0, p);
  auto [mask_h, mask_v] = pair_masks(regions, rule);

  // Neighbors sit at unit distance; after warping their offset is the unit
  // step plus the flow difference.
  auto dfx_h = f.select(1, 0).slice(2, 1, w) - f.select(1, 0).slice(2, 0, w - 1);
  auto dfy_h = f.select(1, 1).slice(2, 1, w) - f.select(1, 1).slice(2, 0, w - 1);
  auto len_h = torch::sqrt(((1.0 + dfx_h) * (1.0 + dfx_h) + dfy_h * dfy_h).clamp_min(1e-24));
  auto dfx_v = f.select(1, 0).slice(1, 1, h) - f.select(1, 0).slice(1, 0, h - 1);
  auto dfy_v = f.select(1, 1).slice(1, 1, h) - f.select(1, 1).slice(1, 0, h - 1);
  auto len_v = torch::sqrt((dfx_v * dfx_v + (1.0 + dfy_v) * (1.0 + dfy_v)).clamp_min(1e-24));

  auto excess_h = (charbonnier(1.0 - len_h, p) - floor) * mask_h.to(f.scalar_type());
  auto excess_v = (charbonnier(1.0 - len_v, p) - floor) * mask_v.to(f.scalar_type());
  auto sums = excess_h.reshape({b, -1}).sum(1) + excess_v.reshape({b, -1}).sum(1);
  auto counts = (mask_h.reshape({b, -1}).sum(1) + mask_v.reshape({b, -1}).sum(1)).to(f.scalar_type());

  if ((counts == 0).any().item<bool>()) {
    log_warning("distance_consistency_loss: no qualifying neighbor pairs for some batch elements");
  }
  auto safe = counts.clamp_min(1.0);
  auto per_element = floor + torch::where(counts > 0, sums / safe, torch::zeros_like(sums));
  return per_element.mean();
}

torch::Tensor smoothness_loss(const FlowField& flow_feature, const CharbonnierParams& p) {
  const auto& f = flow_feature.data;
  const auto h = f.size(2), w = f.size(3);
  const double floor = charbonnier(0.0, p);
  auto dx = f.slice(3, 1, w) - f.slice(3, 0, w - 1);
  auto dy = f.slice(2, 1, h) - f.slice(2, 0, h - 1);
  const auto b = f.size(0);
  auto sums = (charbonnier(dx, p) - floor).reshape({b, -1}).sum(1) +
              (charbonnier(dy, p) - floor).reshape({b, -1}).sum(1);
  const double count = double(dx[0].numel() + dy[0].numel());
  if (count == 0) return torch::full({}, floor, f.options());
  return (floor + sums / count).mean();
}

LossBreakdown total_loss(const LossInputs& in, const LossOptions& options) {
  LossBreakdown out;
  const auto& w = options.weights;
  const auto& psi = options.charbonnier;

  auto low_mask = downsample_mask(in.visible_mask);
  const auto b = low_mask.size(0);
  for (int64_t i = 0; i < b; ++i) {
    if (!low_mask[i].any().item<bool>()) {
      // Thin visible regions can vanish under the majority rule; keep every
      // cell the mask touches instead.
      auto touched = F::max_pool2d(in.visible_mask[i].to(torch::kFloat32).unsqueeze(0).unsqueeze(0),
                                   F::MaxPool2dFuncOptions(kFeatureStride))[0][0] > 0.5;
      low_mask[i] = touched;
    }
  }

  auto term = [](double weight, auto&& compute) {
    if (weight == 0.0) {
      torch::NoGradGuard no_grad;
      return compute().detach();
    }
    return compute();
  };
  auto lp = term(w.photometric, [&] {
    return photometric_loss(in.image1, in.image2, in.flow_full, in.visible_mask, psi);
  });
  auto lf = term(w.feature_metric, [&] {
    return feature_metric_loss(in.semantic1, in.semantic2, in.flow_feature, low_mask, psi);
  });
  auto ld = term(w.distance, [&] {
    return options.smoothness_ablation
               ? smoothness_loss(in.flow_feature, psi)
               : distance_consistency_loss(in.flow_feature, in.regions, psi, options.pair_rule);
  });

  out.photometric = lp.item<double>();
  out.feature_metric = lf.item<double>();
  out.distance = ld.item<double>();
  out.photometric_pixels = in.visible_mask.sum().item<int64_t>();
  out.feature_cells = low_mask.sum().item<int64_t>();
  {
    auto [mh, mv] = pair_masks(in.regions, options.pair_rule);
    out.distance_pairs = mh.sum().item<int64_t>() + mv.sum().item<int64_t>();
  }

  torch::Tensor total = torch::zeros({}, lp.options());
  if (w.photometric != 0.0) total = total + w.photometric * lp;
  if (w.feature_metric != 0.0) total = total + w.feature_metric * lf;
  if (w.distance != 0.0) total = total + w.distance * ld;
  out.total = total;
  out.value = total.item<double>();

  if (!std::isfinite(out.photometric) || !std::isfinite(out.feature_metric) ||
      !std::isfinite(out.distance) || !std::isfinite(out.value)) {
    std::ostringstream msg;
    msg << "non-finite loss: L_p=" << out.photometric << " L_f=" << out.feature_metric
        << " L_d=" << out.distance << " L=" << out.value;
    throw TrainingError(msg.str());
  }
  return out;
}

}  // namespace dcorr
