#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "dcorr/core/types.hpp"

namespace dcorr {

// Query points in a source frame with their predicted locations in one target
// frame and, for evaluation, the ground truth there.
struct CorrespondenceSet {
  std::vector<Point2D> queries;
  std::vector<Point2D> predictions;
  std::vector<Point2D> ground_truth;
  std::vector<bool> visible;  // ground-truth visibility in the target frame
};

inline constexpr std::array<double, 5> kTapThresholds{1.0, 2.0, 4.0, 8.0, 16.0};

struct ThresholdMetrics {
  double threshold = 0.0;
  int64_t true_positives = 0;   // visible, error < threshold
  int64_t false_negatives = 0;  // visible, error >= threshold
  int64_t false_positives = 0;  // occluded in the ground truth (always predicted)
  double delta = 0.0;           // percent
  double jaccard = 0.0;         // percent
};

struct MetricReport {
  double average_distance = 0.0;  // AD, pixels
  double delta_avg = 0.0;         // percent
  double average_jaccard = 0.0;   // AJ, percent
  std::vector<ThresholdMetrics> per_threshold;
  int64_t visible_points = 0;
  int64_t occluded_points = 0;
};

struct TapVidOptions {
  // Without a visibility head every point is predicted visible, so occluded
  // ground-truth points are false positives. Setting this drops them instead.
  bool exclude_occluded = false;
};

// prediction = query + flow sampled bilinearly at the query. `flow` is a
// full-resolution field [1,2,H,W] or [2,H,W]; queries must lie in
// [0,W) x [0,H).
std::vector<Point2D> query_correspondence(const FlowField& flow, const std::vector<Point2D>& queries);

// Counts are pooled over all sets before any division. Throws DataError when
// no visible ground-truth point exists.
MetricReport tapvid_metrics(const std::vector<CorrespondenceSet>& sets, const TapVidOptions& options = {});

nlohmann::json to_json(const MetricReport& report);

}  // namespace dcorr
