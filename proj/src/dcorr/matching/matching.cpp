#include "dcorr/matching/matching.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "dcorr/core/error.hpp"

namespace dcorr {
namespace {

void check_pair(const FeatureMap& a, const FeatureMap& b, const char* op) {
  if (a.data.dim() != 4 || b.data.dim() != 4) {
    throw ArgumentError(std::string(op) + ": expected feature maps [B,c,h,w]");
  }
  if (a.channels() != b.channels()) {
    throw ArgumentError(std::string(op) + ": channel mismatch " + std::to_string(a.channels()) +
                        " vs " + std::to_string(b.channels()));
  }
  if (a.data.sizes() != b.data.sizes()) {
    throw ArgumentError(std::string(op) + ": feature maps differ in shape");
  }
}

}  // namespace

CostVolume cost_volume(const FeatureMap& f1, const FeatureMap& f2) {
  check_pair(f1, f2, "cost_volume");
  const auto b = f1.data.size(0), c = f1.channels(), h = f1.height(), w = f1.width();
  auto a = f1.data.reshape({b, c, h * w}).transpose(1, 2);  // [B, hw, c]
  auto t = f2.data.reshape({b, c, h * w});                   // [B, c, hw]
  auto cost = torch::bmm(a, t) / std::sqrt(double(c));
  return CostVolume{cost.view({b, h, w, h, w})};
}

int64_t candidates_per_cell(double fraction, int64_t cells) {
  // The small slack keeps products like 0.01 * 100 from rounding up to 2.
  const auto n = static_cast<int64_t>(std::ceil(fraction * double(cells) - 1e-9));
  return std::clamp<int64_t>(n, 1, cells);
}

CandidateMask candidate_mask(const FeatureMap& fs1, const FeatureMap& fs2, double fraction) {
  check_pair(fs1, fs2, "candidate_mask");
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ArgumentError("candidate_mask: fraction must lie in (0, 1], got " + std::to_string(fraction));
  }
  torch::NoGradGuard no_grad;
  const auto b = fs1.data.size(0), c = fs1.channels(), h = fs1.height(), w = fs1.width();
  const auto cells = h * w;
  const auto n = candidates_per_cell(fraction, cells);

  auto normalize = [&](const torch::Tensor& f) {
    auto flat = f.detach().reshape({b, c, cells}).to(torch::kFloat64);
    return flat / flat.norm(2, 1, true).clamp_min(1e-12);
  };
  auto similarity = torch::bmm(normalize(fs1.data).transpose(1, 2), normalize(fs2.data));  // [B,hw,hw]
  // Stable descending sort keeps the smaller index first among equal scores.
  auto order = std::get<1>(torch::sort(similarity, /*stable=*/true, /*dim=*/2, /*descending=*/true));
  auto chosen = order.slice(2, 0, n);
  auto mask = torch::zeros({b, cells, cells}, torch::kBool);
  mask.scatter_(2, chosen, true);
  return CandidateMask{mask.view({b, h, w, h, w}), fraction, n};
}

MatchingDistribution masked_softmax(const CostVolume& cost, const CandidateMask& mask) {
  if (cost.data.sizes() != mask.data.sizes()) {
    throw ArgumentError("masked_softmax: cost volume and mask shapes differ");
  }
  const auto b = cost.data.size(0), h = cost.data.size(1), w = cost.data.size(2);
  auto flat_mask = mask.data.reshape({b, h * w, h * w});
  if (!flat_mask.any(2).all().item<bool>()) {
    throw InvariantError("masked_softmax: a source cell has no matching candidates");
  }
  auto flat_cost = cost.data.reshape({b, h * w, h * w});
  auto filled = flat_cost.masked_fill(flat_mask.logical_not(), -std::numeric_limits<double>::infinity());
  auto prob = torch::softmax(filled, 2);
  return MatchingDistribution{prob.view({b, h, w, h, w})};
}

FlowField flow_from_distribution(const MatchingDistribution& distribution, const PixelGrid& grid) {
  const auto& p = distribution.data;
  if (p.dim() != 5) throw ArgumentError("flow_from_distribution: expected distribution [B,h,w,h,w]");
  const auto b = p.size(0), h = p.size(1), w = p.size(2);
  if (grid.coords.size(0) != p.size(3) || grid.coords.size(1) != p.size(4)) {
    throw ArgumentError("flow_from_distribution: grid does not match the target raster");
  }
  auto flat = p.reshape({b, h * w, h * w});
  const auto worst = (flat.detach().sum(2) - 1.0).abs().max().item<double>();
  if (worst > 1e-3) {
    throw InvariantError("flow_from_distribution: distribution rows deviate from 1 by " +
                         std::to_string(worst));
  }
  auto g = grid.coords.to(p.scalar_type()).reshape({h * w, 2});
  auto expected = torch::matmul(flat, g);  // [B, hw, 2]
  auto flow = (expected - g.unsqueeze(0)).view({b, h, w, 2}).permute({0, 3, 1, 2});
  return FlowField{flow.contiguous(), FlowResolution::Feature};
}

}  // namespace dcorr
