#pragma once

// Brute-force reference implementations written with plain loops over
// std::vector. They share no code with the library.

#include <array>
#include <cstdint>
#include <vector>

namespace dcorr::oracle {

using Vec2 = std::array<double, 2>;
using Vec3 = std::array<double, 3>;

// Masked softargmax for one source cell. `costs` and `mask` are row-major over
// an h x w target raster. Returns the expected (x, y) target minus (sx, sy).
Vec2 softargmax_flow(const std::vector<double>& costs, const std::vector<bool>& mask, int64_t h, int64_t w,
                     int64_t sx, int64_t sy);

// Bilinear lookup in a row-major h x w scalar raster with border clamping.
double bilinear(const std::vector<double>& map, int64_t h, int64_t w, double x, double y);

struct TapSet {
  std::vector<Vec2> predictions, ground_truth;
  std::vector<bool> visible;
};

struct TapResult {
  double ad = 0, delta_avg = 0, aj = 0;
  std::array<double, 5> delta{}, jaccard{};
};

TapResult tapvid(const std::vector<TapSet>& sets, bool exclude_occluded);

struct Joint {
  Vec3 axis, pivot;
  double state_deg = 0;
};

struct JointErrors {
  double angle = 0, pos = 0, pos_point = 0, state = 0, dist = 0;
};

// Rotates `p` about the line (pivot, axis) by `deg` with Rodrigues' formula.
Vec3 rotate_about(const Joint& j, const Vec3& p);

JointErrors joint_errors(const Joint& pred, const Joint& gt, const std::vector<Vec3>& src,
                         const std::vector<Vec3>& predicted_tgt);

}  // namespace dcorr::oracle
