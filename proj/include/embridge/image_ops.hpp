#pragma once

#include "embridge/distill.hpp"
#include "embridge/geometry.hpp"

namespace embridge {

/// Copies a square window out of an 8-bit image. The rectangle must lie
/// fully inside the image.
GrayImage crop_image(const GrayImage& image, const CropRect& rect);

/// Separable bilinear resampling (half-pixel centers), values rounded back
/// to 8 bits. Deterministic.
GrayImage resize_bilinear(const GrayImage& image, int out_width, int out_height);

} // namespace embridge
