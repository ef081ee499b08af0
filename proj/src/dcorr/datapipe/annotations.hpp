#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dcorr/core/articulation_params.hpp"
#include "dcorr/core/types.hpp"

namespace dcorr {

struct TrackPoint {
  int64_t first_frame = 0;
  std::vector<Point2D> coords;  // one per frame
  std::vector<bool> visible;    // one per frame
};

// Per-video point tracks. Coordinates are pixels of a width x height frame.
struct TrackAnnotation {
  std::string video;
  int64_t height = 0;
  int64_t width = 0;
  std::vector<TrackPoint> points;

  int64_t num_frames() const { return points.empty() ? 0 : int64_t(points.front().coords.size()); }
};

// JSON: {"video", "height", "width", "points": [{"first_frame", "coords": [[x,y]...],
// "visible": [bool...]}]}. Violations raise DataError naming the field path.
TrackAnnotation load_track_annotations(const std::filesystem::path& path);
void save_track_annotations(const TrackAnnotation& annotation, const std::filesystem::path& path);

// Indices of points that are visible on at least one frame.
std::vector<size_t> evaluable_points(const TrackAnnotation& annotation);

// One articulated-object instance: two frames, their depth, intrinsics, the
// moving-part mask in frame 1 and the ground-truth joint.
struct ArticulatedPairAnnotation {
  torch::Tensor rgb1, rgb2;      // [3,H,W] float
  torch::Tensor depth1, depth2;  // [H,W] double meters, 0 = invalid
  CameraIntrinsics intrinsics;
  torch::Tensor part_mask;       // [H,W] bool
  ArticulationParams ground_truth;
};

// Directory layout: rgb1.png rgb2.png depth1.png depth2.png (16-bit mm),
// part_mask.png, intrinsics.json {fx,fy,cx,cy},
// articulation.json {axis:[3], pivot:[3], state_deg}.
ArticulatedPairAnnotation load_articulated_pair(const std::filesystem::path& dir);
void save_articulated_pair(const ArticulatedPairAnnotation& pair, const std::filesystem::path& dir);

CameraIntrinsics load_intrinsics(const std::filesystem::path& path);
void save_intrinsics(const CameraIntrinsics& k, const std::filesystem::path& path);

}  // namespace dcorr
