#include "dcorr/datapipe/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "dcorr/core/error.hpp"

namespace dcorr {
namespace {

torch::Tensor from_mat_rgb(const cv::Mat& bgr) {
  cv::Mat rgb, f;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  rgb.convertTo(f, CV_32FC3, bgr.depth() == CV_16U ? 1.0 / 65535.0 : 1.0 / 255.0);
  auto t = torch::from_blob(f.data, {f.rows, f.cols, 3}, torch::kFloat32).clone();
  return t.permute({2, 0, 1}).contiguous();
}

void write_or_throw(const std::filesystem::path& path, const cv::Mat& mat) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), mat)) throw DataError("cannot write image " + path.string());
}

}  // namespace

torch::Tensor load_image(const std::filesystem::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_COLOR | cv::IMREAD_ANYDEPTH);
  if (m.empty()) throw DataError("cannot read image " + path.string());
  return from_mat_rgb(m);
}

void save_image(const torch::Tensor& image, const std::filesystem::path& path) {
  if (image.dim() != 3 || image.size(0) != 3) throw ArgumentError("save_image: expected [3,H,W]");
  auto hwc = (image.detach().to(torch::kFloat32).clamp(0, 1) * 255.0).round().to(torch::kUInt8)
                 .permute({1, 2, 0}).contiguous();
  cv::Mat rgb(int(hwc.size(0)), int(hwc.size(1)), CV_8UC3, hwc.data_ptr<uint8_t>());
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  write_or_throw(path, bgr);
}

torch::Tensor load_depth(const std::filesystem::path& path, double scale) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (m.empty()) throw DataError("cannot read depth raster " + path.string());
  if (m.channels() != 1 || m.depth() != CV_16U) {
    throw DataError("depth raster must be single-channel 16-bit: " + path.string());
  }
  cv::Mat d;
  m.convertTo(d, CV_64F, 1.0 / scale);
  return torch::from_blob(d.data, {d.rows, d.cols}, torch::kFloat64).clone();
}

void save_depth(const torch::Tensor& depth_m, const std::filesystem::path& path, double scale) {
  auto mm = (depth_m.detach().to(torch::kFloat64) * scale).round().clamp(0, 65535).to(torch::kInt32)
                .contiguous();
  cv::Mat m32(int(mm.size(0)), int(mm.size(1)), CV_32S, mm.data_ptr<int32_t>());
  cv::Mat m16;
  m32.convertTo(m16, CV_16U);
  write_or_throw(path, m16);
}

torch::Tensor load_mask(const std::filesystem::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (m.empty()) throw DataError("cannot read mask raster " + path.string());
  auto t = torch::from_blob(m.data, {m.rows, m.cols}, torch::kUInt8).clone();
  return t > 0;
}

void save_mask(const torch::Tensor& mask, const std::filesystem::path& path) {
  auto u8 = (mask.to(torch::kBool).to(torch::kUInt8) * 255).contiguous();
  cv::Mat m(int(u8.size(0)), int(u8.size(1)), CV_8UC1, u8.data_ptr<uint8_t>());
  write_or_throw(path, m);
}

std::pair<int64_t, int64_t> resized_shape(int64_t h, int64_t w, int64_t shorter, int64_t multiple) {
  const double scale = double(shorter) / double(std::min(h, w));
  auto round_to = [&](double v) {
    return std::max<int64_t>(multiple, int64_t(std::llround(v / double(multiple))) * multiple);
  };
  return {round_to(double(h) * scale), round_to(double(w) * scale)};
}

torch::Tensor resize_image(const torch::Tensor& image, int64_t h, int64_t w) {
  if (image.dim() != 3) throw ArgumentError("resize_image: expected [C,H,W]");
  if (image.size(1) == h && image.size(2) == w) return image;
  const auto c = image.size(0);
  auto hwc = image.detach().to(torch::kFloat32).permute({1, 2, 0}).contiguous();
  cv::Mat src(int(hwc.size(0)), int(hwc.size(1)), CV_32FC(int(c)), hwc.data_ptr<float>());
  cv::Mat dst;
  const bool shrinking = h < image.size(1) && w < image.size(2);
  cv::resize(src, dst, cv::Size(int(w), int(h)), 0, 0, shrinking ? cv::INTER_AREA : cv::INTER_LINEAR);
  auto out = torch::from_blob(dst.data, {h, w, c}, torch::kFloat32).clone();
  return out.permute({2, 0, 1}).contiguous();
}

bool has_image_extension(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp" || ext == ".ppm";
}

}  // namespace dcorr
