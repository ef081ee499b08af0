#include "dcorr/datapipe/video_index.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "dcorr/core/error.hpp"
#include "dcorr/core/log.hpp"
#include "dcorr/datapipe/image_io.hpp"

namespace dcorr {
namespace fs = std::filesystem;
namespace {

double read_fps(const fs::path& meta) {
  std::ifstream in(meta);
  if (!in) return 0.0;
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    auto j = nlohmann::json::parse(buf.str());
    if (j.is_number()) return j.get<double>();
    if (j.is_object() && j.contains("fps") && j["fps"].is_number()) return j["fps"].get<double>();
  } catch (const nlohmann::json::exception&) {
  }
  return 0.0;
}

bool parse_frame_number(const std::string& stem, int64_t& out) {
  if (stem.empty() || !std::all_of(stem.begin(), stem.end(), ::isdigit)) return false;
  out = std::stoll(stem);
  return true;
}

}  // namespace

VideoIndex index_videos(const fs::path& root) {
  if (!fs::is_directory(root)) throw DataError("index_videos: not a directory: " + root.string());
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());

  VideoIndex index;
  std::vector<std::string> offenders;
  for (const auto& dir : dirs) {
    VideoEntry v;
    v.id = dir.filename().string();
    v.fps = read_fps(dir / "meta");
    std::vector<std::pair<int64_t, fs::path>> frames;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (!e.is_regular_file() || e.path().filename() == "meta") continue;
      int64_t number = 0;
      if (!has_image_extension(e.path()) || !parse_frame_number(e.path().stem().string(), number)) {
        log_warning("index_videos: skipping non-frame file " + e.path().string());
        continue;
      }
      frames.emplace_back(number, e.path());
    }
    std::sort(frames.begin(), frames.end());
    bool duplicate = std::adjacent_find(frames.begin(), frames.end(), [](const auto& a, const auto& b) {
                       return a.first == b.first;
                     }) != frames.end();
    if (frames.empty() || !(v.fps > 0.0) || duplicate) {
      offenders.push_back(v.id + (frames.empty() ? " (no frames)" : !(v.fps > 0.0) ? " (missing or invalid meta fps)"
                                                                                     : " (duplicate frame numbers)"));
      continue;
    }
    for (auto& [n, p] : frames) {
      v.frame_numbers.push_back(n);
      v.frame_paths.push_back(p);
    }
    index.videos.push_back(std::move(v));
  }
  if (!offenders.empty()) {
    std::string msg = "index_videos: invalid videos under " + root.string() + ":";
    for (const auto& o : offenders) msg += " " + o + ";";
    throw DataError(msg);
  }
  if (index.videos.empty()) throw DataError("index_videos: no videos under " + root.string());
  return index;
}

}  // namespace dcorr
