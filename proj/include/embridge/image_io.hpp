#pragma once

#include <filesystem>

#include "embridge/geometry.hpp"

namespace embridge {

/// 16-bit single-channel PNG, the storage format for depth images.
DepthImage read_png16(const std::filesystem::path& path);
void write_png16(const std::filesystem::path& path, const DepthImage& image);

/// 8-bit single-channel PNG (segmentation masks, synthetic raster frames).
GrayImage read_png8(const std::filesystem::path& path);
void write_png8(const std::filesystem::path& path, const GrayImage& image);

/// 8-bit RGB PNG.
RgbImage read_png_rgb(const std::filesystem::path& path);
void write_png_rgb(const std::filesystem::path& path, const RgbImage& image);

} // namespace embridge
