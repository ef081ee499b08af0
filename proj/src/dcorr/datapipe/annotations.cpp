#include "dcorr/datapipe/annotations.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include <json.hpp>

#include "dcorr/core/error.hpp"
#include "dcorr/datapipe/image_io.hpp"

namespace dcorr {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": malformed JSON: " + e.what());
  }
}

void write_json(const json& j, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << std::setprecision(17) << j.dump(2) << '\n';
}

// Field lookup that reports the JSON path of whatever is wrong.
const json& field(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw DataError("missing field " + path + "." + key);
  return j.at(key);
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw DataError("field " + path + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw DataError("field " + path + " must be finite");
  return v;
}

int64_t integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw DataError("field " + path + " must be an integer");
  return j.get<int64_t>();
}

Eigen::Vector3d vec3(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) throw DataError("field " + path + " must be a 3-element array");
  return {number(j[0], path + "[0]"), number(j[1], path + "[1]"), number(j[2], path + "[2]")};
}

}  // namespace

TrackAnnotation load_track_annotations(const fs::path& path) {
  const json root = read_json(path);
  const std::string where = path.filename().string();
  TrackAnnotation out;
  if (root.contains("video") && root["video"].is_string()) out.video = root["video"].get<std::string>();
  out.height = integer(field(root, "height", where), where + ".height");
  out.width = integer(field(root, "width", where), where + ".width");
  if (out.height <= 0 || out.width <= 0) throw DataError("field " + where + ".height/width must be positive");

  const auto& points = field(root, "points", where);
  if (!points.is_array()) throw DataError("field " + where + ".points must be an array");
  int64_t frames = -1;
  for (size_t i = 0; i < points.size(); ++i) {
    const std::string p = where + ".points[" + std::to_string(i) + "]";
    TrackPoint tp;
    tp.first_frame = integer(field(points[i], "first_frame", p), p + ".first_frame");
    const auto& coords = field(points[i], "coords", p);
    const auto& visible = field(points[i], "visible", p);
    if (!coords.is_array() || !visible.is_array() || coords.size() != visible.size()) {
      throw DataError("fields " + p + ".coords and " + p + ".visible must be arrays of equal length");
    }
    if (frames < 0) frames = int64_t(coords.size());
    if (int64_t(coords.size()) != frames) throw DataError("field " + p + ".coords has an inconsistent frame count");
    if (tp.first_frame < 0 || tp.first_frame >= frames) {
      throw DataError("field " + p + ".first_frame is out of range");
    }
    for (size_t t = 0; t < coords.size(); ++t) {
      const std::string c = p + ".coords[" + std::to_string(t) + "]";
      if (!coords[t].is_array() || coords[t].size() != 2) throw DataError("field " + c + " must be [x, y]");
      if (!visible[t].is_boolean()) throw DataError("field " + p + ".visible[" + std::to_string(t) + "] must be boolean");
      const Point2D xy(number(coords[t][0], c + "[0]"), number(coords[t][1], c + "[1]"));
      const bool vis = visible[t].get<bool>();
      if (vis && (xy.x() < 0 || xy.y() < 0 || xy.x() >= double(out.width) || xy.y() >= double(out.height))) {
        throw DataError("field " + c + " lies outside the frame while visible");
      }
      tp.coords.push_back(xy);
      tp.visible.push_back(vis);
    }
    const bool ever = std::find(tp.visible.begin(), tp.visible.end(), true) != tp.visible.end();
    if (ever) {
      for (int64_t t = 0; t <= tp.first_frame; ++t) {
        if (tp.visible[size_t(t)] != (t == tp.first_frame)) {
          throw DataError("field " + p + ".first_frame is not the first visible frame");
        }
      }
    }
    out.points.push_back(std::move(tp));
  }
  return out;
}

void save_track_annotations(const TrackAnnotation& a, const fs::path& path) {
  json points = json::array();
  for (const auto& p : a.points) {
    json coords = json::array();
    for (const auto& c : p.coords) coords.push_back({c.x(), c.y()});
    json visible = json::array();
    for (bool v : p.visible) visible.push_back(v);
    points.push_back({{"first_frame", p.first_frame}, {"coords", coords}, {"visible", visible}});
  }
  write_json({{"video", a.video}, {"height", a.height}, {"width", a.width}, {"points", points}}, path);
}

std::vector<size_t> evaluable_points(const TrackAnnotation& a) {
  std::vector<size_t> out;
  for (size_t i = 0; i < a.points.size(); ++i) {
    const auto& v = a.points[i].visible;
    if (std::find(v.begin(), v.end(), true) != v.end()) out.push_back(i);
  }
  return out;
}

CameraIntrinsics load_intrinsics(const fs::path& path) {
  const json j = read_json(path);
  const std::string w = path.filename().string();
  CameraIntrinsics k;
  k.fx = number(field(j, "fx", w), w + ".fx");
  k.fy = number(field(j, "fy", w), w + ".fy");
  k.cx = number(field(j, "cx", w), w + ".cx");
  k.cy = number(field(j, "cy", w), w + ".cy");
  if (!(k.fx > 0)) throw DataError("field " + w + ".fx must be positive");
  if (!(k.fy > 0)) throw DataError("field " + w + ".fy must be positive");
  return k;
}

void save_intrinsics(const CameraIntrinsics& k, const fs::path& path) {
  write_json({{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}}, path);
}

ArticulatedPairAnnotation load_articulated_pair(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("articulated pair: not a directory: " + dir.string());
  ArticulatedPairAnnotation a;
  a.rgb1 = load_image(dir / "rgb1.png");
  a.rgb2 = load_image(dir / "rgb2.png");
  a.depth1 = load_depth(dir / "depth1.png");
  a.depth2 = load_depth(dir / "depth2.png");
  a.part_mask = load_mask(dir / "part_mask.png");
  a.intrinsics = load_intrinsics(dir / "intrinsics.json");

  const auto sz = a.rgb1.sizes();
  if (a.rgb2.sizes() != sz || a.depth1.size(0) != sz[1] || a.depth1.size(1) != sz[2] ||
      a.depth2.sizes() != a.depth1.sizes() || a.part_mask.sizes() != a.depth1.sizes()) {
    throw DataError("articulated pair " + dir.string() + ": rasters differ in size");
  }

  const json gt = read_json(dir / "articulation.json");
  const std::string w = "articulation.json";
  a.ground_truth.axis = vec3(field(gt, "axis", w), w + ".axis");
  a.ground_truth.pivot = vec3(field(gt, "pivot", w), w + ".pivot");
  a.ground_truth.state_deg = number(field(gt, "state_deg", w), w + ".state_deg");
  const double norm = a.ground_truth.axis.norm();
  if (std::abs(norm - 1.0) > 1e-6) throw DataError("field " + w + ".axis must have unit norm");
  a.ground_truth.axis /= norm;
  return a;
}

void save_articulated_pair(const ArticulatedPairAnnotation& a, const fs::path& dir) {
  fs::create_directories(dir);
  save_image(a.rgb1, dir / "rgb1.png");
  save_image(a.rgb2, dir / "rgb2.png");
  save_depth(a.depth1, dir / "depth1.png");
  save_depth(a.depth2, dir / "depth2.png");
  save_mask(a.part_mask, dir / "part_mask.png");
  save_intrinsics(a.intrinsics, dir / "intrinsics.json");
  const auto& g = a.ground_truth;
  write_json({{"axis", {g.axis.x(), g.axis.y(), g.axis.z()}},
              {"pivot", {g.pivot.x(), g.pivot.y(), g.pivot.z()}},
              {"state_deg", g.state_deg}},
             dir / "articulation.json");
}

}  // namespace dcorr
