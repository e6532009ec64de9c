#include "embridge/image_ops.hpp"

#include <algorithm>
#include <cmath>

namespace embridge {

GrayImage crop_image(const GrayImage& image, const CropRect& rect) {
  if (rect.size < 1) throw ValidationError("crop rectangle must be non-empty");
  if (rect.x < 0 || rect.y < 0 || rect.x + rect.size > image.width ||
      rect.y + rect.size > image.height) {
    throw RangeError("crop rectangle extends outside the image");
  }
  GrayImage out(rect.size, rect.size);
  for (int y = 0; y < rect.size; ++y) {
    for (int x = 0; x < rect.size; ++x) {
      out.at(x, y) = image.at(rect.x + x, rect.y + y);
    }
  }
  return out;
}

GrayImage resize_bilinear(const GrayImage& image, int out_width, int out_height) {
  if (image.width < 1 || image.height < 1) throw ValidationError("cannot resize an empty image");
  if (out_width < 1 || out_height < 1) throw ValidationError("resize target must be non-empty");

  GrayImage out(out_width, out_height);
  const double sx = static_cast<double>(image.width) / out_width;
  const double sy = static_cast<double>(image.height) / out_height;
  for (int y = 0; y < out_height; ++y) {
    const double v = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(image.height - 1));
    const int y0 = static_cast<int>(v);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double fy = v - y0;
    for (int x = 0; x < out_width; ++x) {
      const double u = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(image.width - 1));
      const int x0 = static_cast<int>(u);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double fx = u - x0;
      const double top = (1.0 - fx) * image.at(x0, y0) + fx * image.at(x1, y0);
      const double bottom = (1.0 - fx) * image.at(x0, y1) + fx * image.at(x1, y1);
      const double value = (1.0 - fy) * top + fy * bottom;
      out.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(value), 0l, 255l));
    }
  }
  return out;
}

} // namespace embridge
