#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcorr/datapipe/annotations.hpp"
#include "dcorr/evaluation/articulation.hpp"
#include "dcorr/evaluation/planning.hpp"
#include "dcorr/evaluation/tapvid.hpp"
#include "dcorr/training/model.hpp"

namespace dcorr {

// Flow from rgb1 to rgb2 ([3,H,W] each) in pixels of the input frames. Sides
// that are not multiples of 8 (or a requested `resize_shorter`) are handled by
// resizing for inference and resampling the flow back.
FlowField infer_flow_native(CorrespondenceModel& model, const torch::Tensor& rgb1, const torch::Tensor& rgb2,
                            int64_t resize_shorter = 0);

// Name of a precomputed flow for frames s -> t of a video.
std::filesystem::path precomputed_flow_path(const std::filesystem::path& flows_root, const std::string& video,
                                            int64_t source_frame, int64_t target_frame);

// TAP-Vid style evaluation. Layout: <data>/<video>/frames/<number>.<ext> and
// <data>/<video>/tracks.json. Frames are resized so the shorter side is
// `shorter_side` (sides rounded to multiples of 8) and annotations are scaled
// along; metrics are in that pixel frame. With `flows` set, flows are read
// from precomputed_flow_path() (at the evaluation resolution) instead of
// running a model.
struct TapVidRunOptions {
  std::filesystem::path data;
  std::optional<std::filesystem::path> flows;
  int64_t shorter_side = 256;
  TapVidOptions metrics;
};

struct TapVidRun {
  MetricReport report;
  std::vector<std::string> videos;
  int64_t flows_evaluated = 0;
};

TapVidRun run_tapvid(CorrespondenceModel* model, const TapVidRunOptions& options);

// Frame list of one TAP-Vid video directory, ordered by frame number.
std::vector<std::filesystem::path> tapvid_frames(const std::filesystem::path& video_dir);

// Articulation evaluation over <data>/<instance>/ directories (see
// load_articulated_pair). An optional filter file lists instance names, one
// per line; '#' starts a comment.
struct ArticulationRunOptions {
  std::filesystem::path data;
  std::optional<std::filesystem::path> filter;
};

nlohmann::json run_articulation(CorrespondenceModel& model, const ArticulationRunOptions& options);

// Fits a revolute joint from the flow on the part mask and scores it.
struct ArticulationInstanceResult {
  ArticulationParams predicted;
  ArticulationErrors errors;
  int64_t points = 0;
  int64_t dropped = 0;
};
ArticulationInstanceResult evaluate_articulated_pair(const ArticulatedPairAnnotation& pair, const FlowField& flow);

// Current observation for planning: <dir>/rgb.png, depth.png (16-bit mm),
// intrinsics.json and optionally mask.png.
struct RgbdObservation {
  torch::Tensor rgb;    // [3,H,W]
  torch::Tensor depth;  // [H,W] meters
  CameraIntrinsics intrinsics;
  std::optional<torch::Tensor> mask;
};
RgbdObservation load_rgbd(const std::filesystem::path& dir);

PlannedAction run_plan_action(CorrespondenceModel& model, const RgbdObservation& current, const torch::Tensor& goal,
                              const PlanOptions& options = {});

}  // namespace dcorr
