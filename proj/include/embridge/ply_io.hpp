#pragma once

#include <filesystem>

#include "embridge/geometry.hpp"

namespace embridge {

/// ASCII PLY with float x/y/z and, when the cloud has colors, uchar
/// red/green/blue.
void write_ply(const std::filesystem::path& path, const PointCloud& cloud);

PointCloud read_ply(const std::filesystem::path& path);

} // namespace embridge
