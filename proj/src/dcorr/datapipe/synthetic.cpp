#include "dcorr/datapipe/synthetic.hpp"

#include <array>
#include <cmath>

#include "dcorr/core/error.hpp"

namespace F = torch::nn::functional;

namespace dcorr {
namespace {

constexpr double kPi = 3.14159265358979323846;

// Bilinear lookup in a [3,h,w] accessor at continuous pixel position (x, y),
// clamped to the border.
std::array<float, 3> texel(const torch::TensorAccessor<float, 3>& t, double x, double y) {
  const auto h = t.size(1), w = t.size(2);
  x = std::clamp(x, 0.0, double(w - 1));
  y = std::clamp(y, 0.0, double(h - 1));
  const auto x0 = std::min<int64_t>(int64_t(x), std::max<int64_t>(w - 2, 0));
  const auto y0 = std::min<int64_t>(int64_t(y), std::max<int64_t>(h - 2, 0));
  const auto x1 = std::min<int64_t>(x0 + 1, w - 1), y1 = std::min<int64_t>(y0 + 1, h - 1);
  const double ax = x - double(x0), ay = y - double(y0);
  std::array<float, 3> out{};
  for (int c = 0; c < 3; ++c) {
    out[size_t(c)] = float((1 - ax) * (1 - ay) * t[c][y0][x0] + ax * (1 - ay) * t[c][y0][x1] +
                           (1 - ax) * ay * t[c][y1][x0] + ax * ay * t[c][y1][x1]);
  }
  return out;
}

}  // namespace

torch::Tensor procedural_texture(int64_t h, int64_t w, Rng& rng) {
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  auto img = torch::zeros({3, h, w}, torch::kFloat32);
  const std::array<std::pair<int64_t, float>, 4> octaves{{{24, 1.0f}, {12, 0.7f}, {6, 0.5f}, {3, 0.3f}}};
  for (const auto& [cell, weight] : octaves) {
    const auto gh = h / cell + 2, gw = w / cell + 2;
    auto grid = torch::empty({1, 3, gh, gw}, torch::kFloat32);
    auto acc = grid.accessor<float, 4>();
    for (int c = 0; c < 3; ++c)
      for (int64_t y = 0; y < gh; ++y)
        for (int64_t x = 0; x < gw; ++x) acc[0][c][y][x] = unit(rng) - 0.5f;
    auto up = F::interpolate(grid, F::InterpolateFuncOptions()
                                       .size(std::vector<int64_t>{gh * cell, gw * cell})
                                       .mode(torch::kBilinear)
                                       .align_corners(false));
    img += weight * up[0].slice(1, 0, h).slice(2, 0, w);
  }

  auto ys = torch::arange(h, torch::kFloat32).view({h, 1});
  auto xs = torch::arange(w, torch::kFloat32).view({1, w});
  std::uniform_real_distribution<float> px(0.0f, float(w)), py(0.0f, float(h)), radius(3.0f, 12.0f);
  for (int i = 0; i < 8; ++i) {
    const float cx = px(rng), cy = py(rng), r = radius(rng);
    auto color = torch::tensor({unit(rng) - 0.5f, unit(rng) - 0.5f, unit(rng) - 0.5f}).view({3, 1, 1}) * 2.0f;
    torch::Tensor shape;
    if (i % 2 == 0) {
      shape = ((xs - cx).pow(2) + (ys - cy).pow(2)) < r * r;
    } else {
      shape = ((xs - cx).abs() < r) & ((ys - cy).abs() < 0.6f * r);
    }
    img = torch::where(shape.unsqueeze(0), color, img);
  }

  auto flat = img.view({3, -1});
  auto lo = std::get<0>(flat.min(1)).view({3, 1, 1});
  auto hi = std::get<0>(flat.max(1)).view({3, 1, 1});
  return ((img - lo) / (hi - lo).clamp_min(1e-6)).contiguous();
}

TranslationPair make_translation_pair(int64_t size, int max_shift, Rng& rng) {
  if (size <= 0 || max_shift < 0) throw ArgumentError("make_translation_pair: invalid size or shift");
  const int64_t m = max_shift;
  auto texture = procedural_texture(size + 2 * m, size + 2 * m, rng);
  std::uniform_int_distribution<int> shift(-max_shift, max_shift);
  const int sx = shift(rng), sy = shift(rng);
  TranslationPair p;
  p.image1 = texture.slice(1, m, m + size).slice(2, m, m + size).contiguous();
  p.image2 = texture.slice(1, m + sy, m + sy + size).slice(2, m + sx, m + sx + size).contiguous();
  p.flow_x = -double(sx);
  p.flow_y = -double(sy);
  return p;
}

std::vector<TranslationPair> make_translation_dataset(int64_t count, int64_t size, int max_shift,
                                                      uint64_t seed) {
  std::vector<TranslationPair> out;
  out.reserve(size_t(count));
  for (int64_t i = 0; i < count; ++i) {
    auto rng = make_rng(seed, 0, uint64_t(i));
    out.push_back(make_translation_pair(size, max_shift, rng));
  }
  return out;
}

ArticulatedPairAnnotation render_revolute_pair(const RevoluteSceneOptions& options, Rng& rng) {
  const int64_t s = options.size;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  ArticulatedPairAnnotation out;
  out.intrinsics = CameraIntrinsics{1.1 * double(s), 1.1 * double(s), 0.5 * double(s) - 0.5,
                                    0.5 * double(s) - 0.5};

  Eigen::Vector3d axis(uniform(-0.15, 0.15), 1.0, uniform(-0.15, 0.15));
  axis.normalize();
  const Eigen::Vector3d pivot(uniform(-0.35, -0.15), uniform(-0.05, 0.05), uniform(2.0, 2.4));
  Eigen::Vector3d e1 = Eigen::Vector3d::UnitX() - axis * axis.x();
  e1.normalize();
  const double panel_w = 0.7, panel_h = 0.9, wall_z = 3.2;
  const double start = uniform(-15.0, 15.0);
  const double delta = uniform(options.min_angle_deg, options.max_angle_deg) * (unit(rng) < 0.5 ? -1.0 : 1.0);

  auto panel_tex = procedural_texture(96, 96, rng);
  auto wall_tex = procedural_texture(192, 192, rng);
  auto panel_acc = panel_tex.accessor<float, 3>();
  auto wall_acc = wall_tex.accessor<float, 3>();
  const auto& k = out.intrinsics;

  auto render = [&](double angle_deg, torch::Tensor& rgb, torch::Tensor& depth, torch::Tensor* mask) {
    const Eigen::Matrix3d r = Eigen::AngleAxisd(angle_deg * kPi / 180.0, axis).toRotationMatrix();
    const Eigen::Vector3d dir = r * e1;
    const Eigen::Vector3d normal = dir.cross(axis);
    rgb = torch::zeros({3, s, s}, torch::kFloat32);
    depth = torch::zeros({s, s}, torch::kFloat64);
    auto rgb_acc = rgb.accessor<float, 3>();
    auto depth_acc = depth.accessor<double, 2>();
    auto scratch = torch::zeros({s, s}, torch::kBool);
    auto mask_acc = scratch.accessor<bool, 2>();
    for (int64_t v = 0; v < s; ++v) {
      for (int64_t u = 0; u < s; ++u) {
        const Eigen::Vector3d ray((double(u) - k.cx) / k.fx, (double(v) - k.cy) / k.fy, 1.0);
        std::array<float, 3> color{};
        double z = wall_z;
        bool on_panel = false;
        const double denom = normal.dot(ray);
        if (std::abs(denom) > 1e-9) {
          const double lambda = normal.dot(pivot) / denom;
          const Eigen::Vector3d hit = lambda * ray - pivot;
          const double along = hit.dot(dir), up = hit.dot(axis);
          if (lambda > 0 && lambda < wall_z && along >= 0 && along <= panel_w && std::abs(up) <= panel_h / 2) {
            on_panel = true;
            z = lambda;
            color = texel(panel_acc, along / panel_w * 95.0, (up / panel_h + 0.5) * 95.0);
          }
        }
        if (!on_panel) {
          const Eigen::Vector3d hit = wall_z * ray;
          color = texel(wall_acc, (hit.x() + 2.0) / 4.0 * 191.0, (hit.y() + 2.0) / 4.0 * 191.0);
        }
        for (int c = 0; c < 3; ++c) rgb_acc[c][v][u] = color[size_t(c)];
        depth_acc[v][u] = z;
        mask_acc[v][u] = on_panel;
      }
    }
    if (mask) *mask = scratch;
  };
  render(start, out.rgb1, out.depth1, &out.part_mask);
  render(start + delta, out.rgb2, out.depth2, nullptr);
  out.ground_truth = ArticulationParams{axis, pivot, delta};
  return out;
}

}  // namespace dcorr
