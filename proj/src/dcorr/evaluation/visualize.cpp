#include "dcorr/evaluation/visualize.hpp"

#include <cmath>

#include <opencv2/imgproc.hpp>

#include "dcorr/core/error.hpp"

namespace dcorr {
namespace {

constexpr double kPi = 3.14159265358979323846;

torch::Tensor flow_chw(const FlowField& flow) {
  auto f = flow.data.dim() == 4 ? flow.data[0] : flow.data;
  if (f.dim() != 3 || f.size(0) != 2) throw ArgumentError("visualize: flow must be [2,H,W] or [1,2,H,W]");
  return f.detach().to(torch::kFloat32).contiguous();
}

torch::Tensor hsv_to_rgb(const torch::Tensor& hue_deg, const torch::Tensor& sat) {
  const auto h = hue_deg.size(0), w = hue_deg.size(1);
  auto hsv = torch::stack({hue_deg, sat, torch::ones_like(sat)}, 2).contiguous();
  cv::Mat in(int(h), int(w), CV_32FC3, hsv.data_ptr<float>());
  cv::Mat out;
  cv::cvtColor(in, out, cv::COLOR_HSV2RGB);
  return torch::from_blob(out.data, {h, w, 3}, torch::kFloat32).permute({2, 0, 1}).clone();
}

cv::Mat to_mat(const torch::Tensor& chw) {
  auto hwc = chw.detach().to(torch::kFloat32).clamp(0, 1).permute({1, 2, 0}).contiguous();
  cv::Mat m(int(hwc.size(0)), int(hwc.size(1)), CV_32FC3, hwc.data_ptr<float>());
  return m.clone();
}

torch::Tensor from_mat(const cv::Mat& m) {
  return torch::from_blob(m.data, {m.rows, m.cols, 3}, torch::kFloat32).permute({2, 0, 1}).clone();
}

}  // namespace

torch::Tensor flow_to_color(const FlowField& flow, double max_magnitude) {
  auto f = flow_chw(flow);
  auto mag = (f[0].square() + f[1].square()).sqrt();
  double scale = max_magnitude > 0 ? max_magnitude : mag.max().item<double>();
  if (!(scale > 0)) scale = 1.0;
  auto hue = (torch::atan2(f[1], f[0]) * (180.0 / kPi) + 360.0).remainder(360.0);
  return hsv_to_rgb(hue, (mag / scale).clamp(0, 1));
}

torch::Tensor color_wheel(int64_t size) {
  const double c = 0.5 * double(size - 1);
  auto coords = torch::arange(size, torch::kFloat32) - float(c);
  auto xs = coords.view({1, size}).expand({size, size});
  auto ys = coords.view({size, 1}).expand({size, size});
  FlowField f{torch::stack({xs, ys}), FlowResolution::Full};
  return flow_to_color(f, std::max(c, 1.0));
}

std::vector<std::pair<Point2D, Point2D>> sample_matches(const FlowField& flow, int64_t spacing) {
  if (spacing <= 0) throw ArgumentError("sample_matches: spacing must be positive");
  auto f = flow_chw(flow);
  auto a = f.accessor<float, 3>();
  std::vector<std::pair<Point2D, Point2D>> out;
  for (int64_t y = spacing / 2; y < f.size(1); y += spacing) {
    for (int64_t x = spacing / 2; x < f.size(2); x += spacing) {
      const Point2D p{double(x), double(y)};
      out.emplace_back(p, p + Point2D(a[0][y][x], a[1][y][x]));
    }
  }
  return out;
}

torch::Tensor correspondence_overlay(const torch::Tensor& source, const torch::Tensor& target,
                                     const FlowField& flow, int64_t spacing) {
  if (source.dim() != 3 || source.sizes() != target.sizes()) {
    throw ArgumentError("correspondence_overlay: source and target must be equal-size [3,H,W] images");
  }
  auto f = flow_chw(flow);
  const auto h = source.size(1), w = source.size(2);
  if (f.size(1) != h || f.size(2) != w) throw ArgumentError("correspondence_overlay: flow size differs from the images");

  cv::Mat canvas(int(2 * h), int(2 * w), CV_32FC3, cv::Scalar(0, 0, 0));
  to_mat(source).copyTo(canvas(cv::Rect(0, 0, int(w), int(h))));
  to_mat(target).copyTo(canvas(cv::Rect(int(w), 0, int(w), int(h))));
  to_mat(flow_to_color(flow)).copyTo(canvas(cv::Rect(0, int(h), int(w), int(h))));
  const auto side = std::min(h, w);
  to_mat(color_wheel(side)).copyTo(canvas(cv::Rect(int(w + (w - side) / 2), int(h + (h - side) / 2), int(side), int(side))));

  // Match colors follow the source position so crossings stay readable.
  const auto matches = sample_matches(flow, spacing);
  for (const auto& [p, q] : matches) {
    const double hue = 360.0 * (p.x() / double(w));
    const double sat = 0.4 + 0.6 * (p.y() / double(h));
    cv::Mat px(1, 1, CV_32FC3, cv::Scalar(hue, sat, 1.0)), rgb;
    cv::cvtColor(px, rgb, cv::COLOR_HSV2RGB);
    const auto c = rgb.at<cv::Vec3f>(0, 0);
    const cv::Scalar color(c[0], c[1], c[2]);
    const cv::Point a(int(std::lround(p.x())), int(std::lround(p.y())));
    const cv::Point b(int(std::lround(q.x() + double(w))), int(std::lround(q.y())));
    cv::circle(canvas, a, 2, color, cv::FILLED, cv::LINE_AA);
    cv::circle(canvas, b, 2, color, cv::FILLED, cv::LINE_AA);
    cv::line(canvas, a, b, color, 1, cv::LINE_AA);
  }
  return from_mat(canvas);
}

torch::Tensor pca_overlay(const torch::Tensor& source, const torch::Tensor& target, const FeatureMap& features1,
                          const FeatureMap& features2) {
  if (source.dim() != 3 || source.sizes() != target.sizes()) {
    throw ArgumentError("pca_overlay: source and target must be equal-size [3,H,W] images");
  }
  auto f1 = features1.data.detach().to(torch::kFloat64), f2 = features2.data.detach().to(torch::kFloat64);
  if (f1.dim() != 4 || f1.size(0) != 1 || f1.sizes() != f2.sizes()) {
    throw ArgumentError("pca_overlay: feature maps must be equal-size [1,c,h,w]");
  }
  const auto c = f1.size(1), h = f1.size(2), w = f1.size(3);
  auto x = torch::cat({f1[0].reshape({c, h * w}), f2[0].reshape({c, h * w})}, 1).t();  // [2hw, c]
  x = x - x.mean(0, true);
  auto [evals, evecs] = torch::linalg_eigh(x.t().mm(x));
  const auto k = std::min<int64_t>(3, c);
  auto basis = evecs.flip({1}).slice(1, 0, k);  // largest first
  auto proj = x.mm(basis);                      // [2hw, k]
  if (k < 3) proj = torch::cat({proj, torch::zeros({proj.size(0), 3 - k}, proj.options())}, 1);
  auto lo = std::get<0>(proj.min(0, true)), hi = std::get<0>(proj.max(0, true));
  proj = (proj - lo) / (hi - lo).clamp_min(1e-12);
  auto colors = proj.t().reshape({3, 2, h, w}).to(torch::kFloat32);

  const auto hh = source.size(1), ww = source.size(2);
  auto up = [&](const torch::Tensor& t) {
    return torch::nn::functional::interpolate(
               t.unsqueeze(0), torch::nn::functional::InterpolateFuncOptions()
                                   .size(std::vector<int64_t>{hh, ww})
                                   .mode(torch::kNearest))[0];
  };
  auto left = 0.3 * source.to(torch::kFloat32) + 0.7 * up(colors.select(1, 0));
  auto right = 0.3 * target.to(torch::kFloat32) + 0.7 * up(colors.select(1, 1));
  return torch::cat({left, right}, 2).clamp(0, 1);
}

}  // namespace dcorr
