#include "embridge/filter.hpp"

namespace embridge {

std::pair<PointCloud, FilterReport> filter_human(const DepthImage& depth,
                                                 const CameraIntrinsics& intr,
                                                 const SegmentationMask& mask,
                                                 const RgbImage* color) {
  if (!depth.same_size(mask)) {
    throw ShapeError("segmentation mask dimensions do not match the depth image");
  }

  // Invert the mask so unproject keeps everything except embodiment pixels.
  SegmentationMask keep(mask.width, mask.height);
  for (std::size_t i = 0; i < mask.pixels.size(); ++i) {
    keep.pixels[i] = mask.pixels[i] ? 0 : 1;
  }

  PointCloud cloud = unproject(depth, intr, &keep, color);

  FilterReport report;
  for (std::size_t i = 0; i < depth.pixels.size(); ++i) {
    if (depth.pixels[i] != 0) ++report.total;
  }
  report.kept = cloud.size();
  report.removed = report.total - report.kept;
  return {std::move(cloud), report};
}

std::pair<PointCloud, FilterReport> filter_robot(
    const PointCloud& cloud, const KinematicChain& chain,
    const OccupancyModel& occ, const JointState& q, double margin,
    const RigidTransform& base_pose) {
  if (margin < 0.0) throw ValidationError("filter margin must be non-negative");
  occ.validate(chain);
  const auto poses = forward_kinematics(chain, q, base_pose);

  PointCloud kept;
  kept.points.reserve(cloud.size());
  if (cloud.has_colors()) kept.colors.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (point_in_occupancy(occ, poses, cloud.points[i], margin)) continue;
    kept.points.push_back(cloud.points[i]);
    if (cloud.has_colors()) kept.colors.push_back(cloud.colors[i]);
  }

  FilterReport report;
  report.total = cloud.size();
  report.kept = kept.size();
  report.removed = report.total - report.kept;
  report.margin = margin;
  return {std::move(kept), report};
}

} // namespace embridge
