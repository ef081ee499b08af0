#pragma once

#include <filesystem>

#include "dcorr/core/types.hpp"

namespace dcorr {

// RGB image as float [3,H,W] in [0,1].
torch::Tensor load_image(const std::filesystem::path& path);
void save_image(const torch::Tensor& image, const std::filesystem::path& path);

// 16-bit depth raster in millimeters -> double [H,W] meters (0 = invalid).
torch::Tensor load_depth(const std::filesystem::path& path, double scale = 1000.0);
void save_depth(const torch::Tensor& depth_m, const std::filesystem::path& path, double scale = 1000.0);

// Single-channel raster, nonzero = true.
torch::Tensor load_mask(const std::filesystem::path& path);
void save_mask(const torch::Tensor& mask, const std::filesystem::path& path);

// Size (H, W) after resizing the shorter side to `shorter` and rounding both
// sides to the nearest positive multiple of `multiple`.
std::pair<int64_t, int64_t> resized_shape(int64_t h, int64_t w, int64_t shorter, int64_t multiple);

// Bilinear (area for downscaling) resize of a [C,H,W] float image.
torch::Tensor resize_image(const torch::Tensor& image, int64_t h, int64_t w);

bool has_image_extension(const std::filesystem::path& path);

}  // namespace dcorr
