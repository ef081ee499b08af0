#include "dcorr/evaluation/tapvid.hpp"

#include <cmath>

#include "dcorr/core/error.hpp"
#include "dcorr/core/geometry.hpp"

namespace dcorr {

std::vector<Point2D> query_correspondence(const FlowField& flow, const std::vector<Point2D>& queries) {
  auto data = flow.data;
  if (data.dim() == 3) data = data.unsqueeze(0);
  if (data.dim() != 4 || data.size(0) != 1 || data.size(1) != 2) {
    throw ArgumentError("query_correspondence: flow must be [1,2,H,W]");
  }
  const auto h = data.size(2), w = data.size(3);
  if (queries.empty()) return {};
  auto coords = torch::empty({1, 1, int64_t(queries.size()), 2}, torch::kFloat64);
  auto acc = coords.accessor<double, 4>();
  for (size_t i = 0; i < queries.size(); ++i) {
    const auto& q = queries[i];
    if (!(q.x() >= 0 && q.y() >= 0 && q.x() < double(w) && q.y() < double(h))) {
      throw ArgumentError("query_correspondence: query " + std::to_string(i) + " (" + std::to_string(q.x()) +
                          ", " + std::to_string(q.y()) + ") lies outside the " + std::to_string(w) + "x" +
                          std::to_string(h) + " source frame");
    }
    acc[0][0][int64_t(i)][0] = q.x();
    acc[0][0][int64_t(i)][1] = q.y();
  }
  auto sampled = bilinear_sample(data.detach().to(torch::kFloat64), coords);  // [1,2,1,N]
  auto s = sampled.accessor<double, 4>();
  std::vector<Point2D> out;
  out.reserve(queries.size());
  for (size_t i = 0; i < queries.size(); ++i) {
    out.emplace_back(queries[i].x() + s[0][0][0][int64_t(i)], queries[i].y() + s[0][1][0][int64_t(i)]);
  }
  return out;
}

MetricReport tapvid_metrics(const std::vector<CorrespondenceSet>& sets, const TapVidOptions& options) {
  MetricReport r;
  std::array<int64_t, kTapThresholds.size()> within{};
  double distance_sum = 0.0;
  for (const auto& set : sets) {
    const auto n = set.predictions.size();
    if (set.ground_truth.size() != n || set.visible.size() != n) {
      throw ArgumentError("tapvid_metrics: predictions, ground truth and visibility differ in length");
    }
    for (size_t i = 0; i < n; ++i) {
      if (!set.predictions[i].allFinite()) throw ArgumentError("tapvid_metrics: non-finite prediction");
      if (!set.visible[i]) {
        ++r.occluded_points;
        continue;
      }
      const double e = (set.predictions[i] - set.ground_truth[i]).norm();
      ++r.visible_points;
      distance_sum += e;
      for (size_t t = 0; t < kTapThresholds.size(); ++t) within[t] += e < kTapThresholds[t] ? 1 : 0;
    }
  }
  if (r.visible_points == 0) throw DataError("tapvid_metrics: empty evaluation set (no visible ground truth)");

  r.average_distance = distance_sum / double(r.visible_points);
  const int64_t fp = options.exclude_occluded ? 0 : r.occluded_points;
  for (size_t t = 0; t < kTapThresholds.size(); ++t) {
    ThresholdMetrics m;
    m.threshold = kTapThresholds[t];
    m.true_positives = within[t];
    m.false_negatives = r.visible_points - within[t];
    m.false_positives = fp;
    m.delta = 100.0 * double(m.true_positives) / double(r.visible_points);
    m.jaccard = 100.0 * double(m.true_positives) / double(m.true_positives + m.false_negatives + m.false_positives);
    r.delta_avg += m.delta / double(kTapThresholds.size());
    r.average_jaccard += m.jaccard / double(kTapThresholds.size());
    r.per_threshold.push_back(m);
  }
  return r;
}

nlohmann::json to_json(const MetricReport& r) {
  auto per = nlohmann::json::array();
  for (const auto& m : r.per_threshold) {
    per.push_back({{"threshold", m.threshold},
                   {"delta", m.delta},
                   {"AJ", m.jaccard},
                   {"TP", m.true_positives},
                   {"FN", m.false_negatives},
                   {"FP", m.false_positives}});
  }
  return {{"AD", r.average_distance},
          {"delta_avg", r.delta_avg},
          {"AJ", r.average_jaccard},
          {"per_threshold", per},
          {"visible_points", r.visible_points},
          {"occluded_points", r.occluded_points}};
}

}  // namespace dcorr
