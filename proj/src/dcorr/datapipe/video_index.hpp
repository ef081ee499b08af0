#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace dcorr {

struct VideoEntry {
  std::string id;
  double fps = 0.0;
  std::vector<int64_t> frame_numbers;                // strictly increasing
  std::vector<std::filesystem::path> frame_paths;   // parallel to frame_numbers
};

struct VideoIndex {
  std::vector<VideoEntry> videos;  // sorted by id
};

// Scans <root>/<video_id>/<frame_number>.<ext> with <root>/<video_id>/meta
// holding the frame rate ({"fps": 30} or a bare number). Non-image files are
// skipped with a warning; videos without frames or without a valid meta
// produce a DataError naming every offender.
VideoIndex index_videos(const std::filesystem::path& root);

}  // namespace dcorr
