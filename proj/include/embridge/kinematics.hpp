#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "embridge/geometry.hpp"

namespace embridge {

enum class JointKind { kFixed, kRevolute, kPrismatic };

const char* to_string(JointKind kind);

struct Joint {
  std::string name;
  std::string parent;
  std::string child;
  JointKind kind = JointKind::kFixed;
  RigidTransform origin;
  Eigen::Vector3d axis{0.0, 0.0, 1.0};
  std::optional<std::array<double, 2>> limits; // [lower, upper]

  bool moving() const { return kind != JointKind::kFixed; }
};

/// Parsed robot description: a joint tree rooted at a single base link.
struct KinematicChain {
  std::vector<std::string> links;
  std::vector<Joint> joints;
  std::string base_link;

  bool has_link(const std::string& name) const;
  const Joint* find_joint(const std::string& name) const;

  /// Tree/axis/limit invariants; throws StructureError or ValidationError.
  /// On success fills in base_link (the unique root).
  void validate();
};

/// Per-frame joint values: radians for revolute joints, meters for prismatic.
struct JointState {
  double timestamp = 0.0;
  std::map<std::string, double> values;
};

/// Parses the URDF subset: robot/link/joint elements, origin xyz+rpy, axis,
/// limit lower/upper. Joint kinds fixed/revolute/prismatic. Mimic joints,
/// transmissions and mesh geometry raise UnsupportedFeatureError.
KinematicChain parse_chain(const std::string& xml_text);

/// Out-of-limit joint values produce warnings, one message per joint; real
/// teleop logs may exceed nominal limits, so this never throws.
std::vector<std::string> limit_warnings(const KinematicChain& chain, const JointState& q);

/// Link poses from joint values. The base link sits at base_pose (identity by
/// default); each child pose is parent ∘ joint origin ∘ joint motion.
/// Missing values for moving joints raise ValidationError naming the joint.
std::map<std::string, RigidTransform> forward_kinematics(
    const KinematicChain& chain, const JointState& q,
    const RigidTransform& base_pose = RigidTransform::identity());

} // namespace embridge
