#include "dcorr/evaluation/runners.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "dcorr/core/error.hpp"
#include "dcorr/core/flow_io.hpp"
#include "dcorr/datapipe/annotations.hpp"
#include "dcorr/datapipe/image_io.hpp"

namespace F = torch::nn::functional;

namespace dcorr {
namespace fs = std::filesystem;

FlowField infer_flow_native(CorrespondenceModel& model, const torch::Tensor& rgb1, const torch::Tensor& rgb2,
                            int64_t resize_shorter) {
  if (rgb1.dim() != 3 || rgb1.sizes() != rgb2.sizes()) {
    throw ArgumentError("infer_flow: source and target must be equal-size [3,H,W] images");
  }
  const auto h = rgb1.size(1), w = rgb1.size(2);
  if (resize_shorter == 0 && h % kFeatureStride == 0 && w % kFeatureStride == 0) {
    return model.infer(rgb1.unsqueeze(0), rgb2.unsqueeze(0));
  }
  const auto [rh, rw] = resized_shape(h, w, resize_shorter > 0 ? resize_shorter : std::min(h, w), kFeatureStride);
  auto flow = model.infer(resize_image(rgb1, rh, rw).unsqueeze(0), resize_image(rgb2, rh, rw).unsqueeze(0)).data;
  flow = F::interpolate(flow, F::InterpolateFuncOptions()
                                  .size(std::vector<int64_t>{h, w})
                                  .mode(torch::kBilinear)
                                  .align_corners(false));
  auto scale = torch::tensor({double(w) / double(rw), double(h) / double(rh)}, flow.options()).view({1, 2, 1, 1});
  return FlowField{flow * scale, FlowResolution::Full};
}

fs::path precomputed_flow_path(const fs::path& flows_root, const std::string& video, int64_t s, int64_t t) {
  return flows_root / video / (std::to_string(s) + "_" + std::to_string(t) + ".dfl1");
}

std::vector<fs::path> tapvid_frames(const fs::path& video_dir) {
  const auto dir = video_dir / "frames";
  if (!fs::is_directory(dir)) throw DataError("missing frames directory " + dir.string());
  std::vector<std::pair<int64_t, fs::path>> frames;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file() || !has_image_extension(e.path())) continue;
    const auto stem = e.path().stem().string();
    if (stem.empty() || !std::all_of(stem.begin(), stem.end(), ::isdigit)) continue;
    frames.emplace_back(std::stoll(stem), e.path());
  }
  std::sort(frames.begin(), frames.end());
  std::vector<fs::path> out;
  for (auto& f : frames) out.push_back(f.second);
  if (out.empty()) throw DataError("no frames in " + dir.string());
  return out;
}

namespace {

std::vector<std::string> subdirectories(const fs::path& root) {
  if (!fs::is_directory(root)) throw DataError("data directory not found: " + root.string());
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) out.push_back(e.path().filename().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Maps a pixel coordinate to a resized frame, keeping pixel centers aligned.
double rescale(double v, int64_t from, int64_t to) { return (v + 0.5) * double(to) / double(from) - 0.5; }

}  // namespace

TapVidRun run_tapvid(CorrespondenceModel* model, const TapVidRunOptions& options) {
  if (!model && !options.flows) throw ArgumentError("run_tapvid: need a model or precomputed flows");
  TapVidRun run;
  std::vector<CorrespondenceSet> sets;
  for (const auto& video : subdirectories(options.data)) {
    const auto vdir = options.data / video;
    if (!fs::exists(vdir / "tracks.json")) continue;
    const auto ann = load_track_annotations(vdir / "tracks.json");
    const auto frames = tapvid_frames(vdir);
    if (int64_t(frames.size()) != ann.num_frames()) {
      throw DataError("video " + video + ": " + std::to_string(frames.size()) + " frames but tracks.json has " +
                      std::to_string(ann.num_frames()));
    }
    const auto [eh, ew] = resized_shape(ann.height, ann.width, options.shorter_side, kFeatureStride);
    std::map<int64_t, torch::Tensor> cache;
    auto frame = [&](int64_t i) {
      auto it = cache.find(i);
      if (it != cache.end()) return it->second;
      auto img = load_image(frames[size_t(i)]);
      if (img.size(1) != ann.height || img.size(2) != ann.width) {
        throw DataError("video " + video + ": frame " + frames[size_t(i)].filename().string() +
                        " does not match the annotated size");
      }
      if (img.size(1) != eh || img.size(2) != ew) img = resize_image(img, eh, ew);
      return cache[i] = img;
    };

    std::map<int64_t, std::vector<size_t>> by_source;
    for (auto i : evaluable_points(ann)) by_source[ann.points[i].first_frame].push_back(i);
    for (const auto& [s, ids] : by_source) {
      std::vector<Point2D> queries;
      for (auto i : ids) {
        const auto& q = ann.points[i].coords[size_t(s)];
        queries.emplace_back(std::clamp(rescale(q.x(), ann.width, ew), 0.0, double(ew - 1)),
                             std::clamp(rescale(q.y(), ann.height, eh), 0.0, double(eh - 1)));
      }
      for (int64_t t = s + 1; t < ann.num_frames(); ++t) {
        FlowField flow;
        if (options.flows) {
          flow = read_flow(precomputed_flow_path(*options.flows, video, s, t));
          if (flow.height() != eh || flow.width() != ew) {
            throw DataError("precomputed flow for " + video + " " + std::to_string(s) + "->" + std::to_string(t) +
                            " is " + std::to_string(flow.width()) + "x" + std::to_string(flow.height()) +
                            ", expected " + std::to_string(ew) + "x" + std::to_string(eh));
          }
        } else {
          flow = infer_flow_native(*model, frame(s), frame(t));
        }
        ++run.flows_evaluated;
        CorrespondenceSet set;
        set.queries = queries;
        set.predictions = query_correspondence(flow, queries);
        for (auto i : ids) {
          const auto& g = ann.points[i].coords[size_t(t)];
          set.ground_truth.emplace_back(rescale(g.x(), ann.width, ew), rescale(g.y(), ann.height, eh));
          set.visible.push_back(ann.points[i].visible[size_t(t)]);
        }
        sets.push_back(std::move(set));
      }
    }
    run.videos.push_back(video);
  }
  if (run.videos.empty()) throw DataError("no video with tracks.json under " + options.data.string());
  run.report = tapvid_metrics(sets, options.metrics);
  return run;
}

ArticulationInstanceResult evaluate_articulated_pair(const ArticulatedPairAnnotation& pair, const FlowField& flow) {
  std::vector<Point2D> queries;
  auto mask = pair.part_mask.to(torch::kBool).contiguous();
  auto m = mask.accessor<bool, 2>();
  for (int64_t y = 0; y < mask.size(0); ++y)
    for (int64_t x = 0; x < mask.size(1); ++x)
      if (m[y][x]) queries.emplace_back(double(x), double(y));
  if (queries.empty()) throw DataError("articulated pair: the part mask is empty");
  const auto predictions = query_correspondence(flow, queries);
  const auto lifted = lift_correspondences(queries, predictions, pair.depth1, pair.depth2, pair.intrinsics);
  ArticulationInstanceResult r;
  r.predicted = fit_revolute_joint(lifted.source, lifted.target);
  r.errors = articulation_errors(r.predicted, pair.ground_truth, lifted.source, lifted.target);
  r.points = int64_t(lifted.source.size());
  r.dropped = lifted.dropped;
  return r;
}

nlohmann::json run_articulation(CorrespondenceModel& model, const ArticulationRunOptions& options) {
  auto names = subdirectories(options.data);
  if (options.filter) {
    std::ifstream in(*options.filter);
    if (!in) throw DataError("cannot open filter file " + options.filter->string());
    std::set<std::string> available(names.begin(), names.end());
    std::vector<std::string> chosen;
    for (std::string line; std::getline(in, line);) {
      line = line.substr(0, line.find('#'));
      line.erase(0, line.find_first_not_of(" \t\r"));
      line.erase(line.find_last_not_of(" \t\r") + 1);
      if (line.empty()) continue;
      if (!available.count(line)) throw DataError("filter lists unknown instance '" + line + "'");
      chosen.push_back(line);
    }
    names = chosen;
  }
  if (names.empty()) throw DataError("no articulated instances under " + options.data.string());

  auto instances = nlohmann::json::array();
  std::vector<ArticulationErrors> ok;
  int64_t failed = 0;
  for (const auto& name : names) {
    const auto pair = load_articulated_pair(options.data / name);
    try {
      const auto flow = infer_flow_native(model, pair.rgb1, pair.rgb2);
      const auto r = evaluate_articulated_pair(pair, flow);
      auto j = to_json(r.errors);
      j["name"] = name;
      j["predicted"] = to_json(r.predicted);
      j["points"] = r.points;
      j["dropped"] = r.dropped;
      instances.push_back(j);
      ok.push_back(r.errors);
    } catch (const DataError& e) {
      // Degenerate or rank-deficient fits are reported per instance.
      ++failed;
      instances.push_back({{"name", name}, {"error", e.what()}});
    }
  }

  auto summarize = [&](auto pick) {
    std::vector<double> v;
    for (const auto& e : ok) v.push_back(pick(e));
    if (v.empty()) return std::pair<double, double>{std::nan(""), std::nan("")};
    double mean = 0.0;
    for (double x : v) mean += x / double(v.size());
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    const double median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    return std::pair<double, double>{mean, median};
  };
  nlohmann::json mean, median;
  const std::vector<std::pair<std::string, double ArticulationErrors::*>> fields{
      {"angle", &ArticulationErrors::angle_deg},
      {"pos", &ArticulationErrors::position_m},
      {"pos_point", &ArticulationErrors::position_point_m},
      {"state", &ArticulationErrors::state_deg},
      {"dist", &ArticulationErrors::distance_m}};
  nlohmann::json report;
  for (const auto& [key, member] : fields) {
    const auto [mn, md] = summarize([m = member](const ArticulationErrors& e) { return e.*m; });
    mean[key] = mn;
    median[key] = md;
    report[key] = mn;
  }
  report["median"] = median;
  report["evaluated"] = int64_t(ok.size());
  report["failed"] = failed;
  report["instances"] = instances;
  return report;
}

RgbdObservation load_rgbd(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("observation directory not found: " + dir.string());
  RgbdObservation o;
  o.rgb = load_image(dir / "rgb.png");
  o.depth = load_depth(dir / "depth.png");
  o.intrinsics = load_intrinsics(dir / "intrinsics.json");
  if (fs::exists(dir / "mask.png")) o.mask = load_mask(dir / "mask.png");
  if (o.depth.size(0) != o.rgb.size(1) || o.depth.size(1) != o.rgb.size(2) ||
      (o.mask && o.mask->sizes() != o.depth.sizes())) {
    throw DataError("observation " + dir.string() + ": rasters differ in size");
  }
  return o;
}

PlannedAction run_plan_action(CorrespondenceModel& model, const RgbdObservation& current, const torch::Tensor& goal,
                              const PlanOptions& options) {
  auto g = goal;
  if (g.sizes() != current.rgb.sizes()) g = resize_image(g, current.rgb.size(1), current.rgb.size(2));
  const auto flow = infer_flow_native(model, current.rgb, g);
  return plan_action(current.depth, current.intrinsics, flow, current.mask, options);
}

}  // namespace dcorr
