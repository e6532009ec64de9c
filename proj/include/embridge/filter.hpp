#pragma once

#include <cstddef>
#include <utility>

#include "embridge/geometry.hpp"
#include "embridge/kinematics.hpp"
#include "embridge/occupancy.hpp"

namespace embridge {

/// Embodiment mask paired with a depth image; nonzero = embodiment pixel.
using SegmentationMask = GrayImage;

struct FilterReport {
  std::size_t total = 0;
  std::size_t removed = 0;
  std::size_t kept = 0;
  double margin = 0.0;
};

/// Unprojects the depth image, dropping masked pixels during unprojection.
/// Total counts valid-depth pixels; removed counts those the mask excluded.
/// Optional color attaches per-point RGB to the kept points.
std::pair<PointCloud, FilterReport> filter_human(const DepthImage& depth,
                                                 const CameraIntrinsics& intr,
                                                 const SegmentationMask& mask,
                                                 const RgbImage* color = nullptr);

/// Drops every cloud point within `margin` of the robot's occupancy volume
/// posed by forward kinematics at q. Kept points preserve input order and
/// colors. base_pose places the robot base in the cloud's frame.
std::pair<PointCloud, FilterReport> filter_robot(
    const PointCloud& cloud, const KinematicChain& chain,
    const OccupancyModel& occ, const JointState& q, double margin,
    const RigidTransform& base_pose = RigidTransform::identity());

} // namespace embridge
