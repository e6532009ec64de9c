#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "embridge/geometry.hpp"
#include "embridge/kinematics.hpp"

namespace embridge {

enum class PrimitiveKind { kSphere, kCapsule, kBox };

/// One collision volume in a link's local frame. Capsules run along local z,
/// centered on the origin; `length` is the segment between the cap centers.
/// Boxes store full edge lengths in `size`.
struct CollisionPrimitive {
  PrimitiveKind kind = PrimitiveKind::kSphere;
  RigidTransform local_pose;
  double radius = 0.0;          // sphere, capsule
  double length = 0.0;          // capsule
  Eigen::Vector3d size{0, 0, 0}; // box

  void validate() const;
};

/// Exact signed distance from a point in the primitive's local frame
/// (negative inside).
double signed_distance(const CollisionPrimitive& prim, const Eigen::Vector3d& p_local);

struct OccupancyModel {
  std::map<std::string, std::vector<CollisionPrimitive>> links;

  /// Every referenced link must exist in the chain; dimensions positive.
  void validate(const KinematicChain& chain) const;
};

/// Minimum signed distance from p to the posed occupancy volume.
double occupancy_distance(const OccupancyModel& model,
                          const std::map<std::string, RigidTransform>& link_poses,
                          const Eigen::Vector3d& p);

/// True iff p lies within `margin` of the occupancy volume surface or inside
/// it. link_poses must cover every link the model references.
bool point_in_occupancy(const OccupancyModel& model,
                        const std::map<std::string, RigidTransform>& link_poses,
                        const Eigen::Vector3d& p, double margin);

/// Sidecar format: {"links": {name: [{"kind": "sphere"|"capsule"|"box",
/// "xyz": [...], "rpy": [...], "radius"|"length"|"size": ...}, ...]}}.
OccupancyModel load_occupancy(const std::filesystem::path& path);
OccupancyModel parse_occupancy(const std::string& json_text);

} // namespace embridge
