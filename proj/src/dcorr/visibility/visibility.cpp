#include "dcorr/visibility/visibility.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "dcorr/core/error.hpp"

namespace dcorr {

SimilarityMap max_similarity_map(const CostVolume& cost, int stride) {
  if (cost.data.dim() != 5) throw ArgumentError("max_similarity_map: expected cost volume [B,h,w,h,w]");
  const auto b = cost.data.size(0), h = cost.data.size(1), w = cost.data.size(2);
  auto best = std::get<0>(cost.data.detach().reshape({b, h, w, h * w}).max(3));  // [B,h,w]
  auto up = best.repeat_interleave(stride, 1).repeat_interleave(stride, 2);
  return SimilarityMap{up.contiguous()};
}

std::vector<double> segment_scores(const torch::Tensor& similarity, const torch::Tensor& masks) {
  if (similarity.dim() != 2 || masks.dim() != 3 || masks.size(1) != similarity.size(0) ||
      masks.size(2) != similarity.size(1)) {
    throw ArgumentError("segment_scores: expected similarity [H,W] and masks [N,H,W]");
  }
  auto s = similarity.detach().to(torch::kFloat64);
  auto m = masks.to(torch::kBool);
  std::vector<double> scores;
  bool any = false;
  for (int64_t i = 0; i < m.size(0); ++i) {
    const auto count = m[i].sum().item<int64_t>();
    if (count == 0) {
      scores.push_back(-std::numeric_limits<double>::infinity());
      continue;
    }
    any = true;
    scores.push_back(s.masked_select(m[i]).sum().item<double>() / double(count));
  }
  if (!any) throw DataError("segment_scores: every segment is empty");
  return scores;
}

VisibleRegionMask select_visible_regions(const torch::Tensor& masks, const std::vector<double>& scores,
                                         int k) {
  if (k < 1) throw ArgumentError("select_visible_regions: k must be >= 1");
  if (masks.dim() != 3 || size_t(masks.size(0)) != scores.size()) {
    throw ArgumentError("select_visible_regions: one score per mask required");
  }
  auto m = masks.to(torch::kBool);
  const auto n = m.size(0), h = m.size(1), w = m.size(2);
  std::vector<int64_t> area(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) area[size_t(i)] = m[i].sum().item<int64_t>();
  const auto nonempty = std::count_if(area.begin(), area.end(), [](int64_t a) { return a > 0; });

  VisibleRegionMask out;
  if (nonempty <= 1) {
    out.data = torch::ones({h, w}, torch::kBool);
    for (int64_t i = 0; i < n; ++i) if (area[size_t(i)] > 0) out.selected.push_back(i);
    out.fallback = true;
    return out;
  }

  std::vector<int64_t> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
    if (scores[size_t(a)] != scores[size_t(b)]) return scores[size_t(a)] > scores[size_t(b)];
    if (area[size_t(a)] != area[size_t(b)]) return area[size_t(a)] > area[size_t(b)];
    return a < b;
  });
  out.data = torch::zeros({h, w}, torch::kBool);
  for (int64_t i = 0; i < std::min<int64_t>(k, n); ++i) {
    const auto idx = order[size_t(i)];
    if (area[size_t(idx)] == 0) break;
    out.selected.push_back(idx);
    out.data |= m[idx];
  }
  return out;
}

}  // namespace dcorr
