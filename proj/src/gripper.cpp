#include "embridge/gripper.hpp"

#include <algorithm>
#include <cmath>

namespace embridge {

namespace {

bool finite(const Eigen::Vector3d& v) { return v.allFinite(); }

// Symmetric linspace helper; a single sample sits at the interval center.
double grid_coord(int i, int n, double lo, double hi) {
  if (n == 1) return 0.5 * (lo + hi);
  return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
}

} // namespace

void GripperTemplate::validate() const {
  if (max_open <= 0.0 || finger_length <= 0.0 || pad_width <= 0.0 || anchor_depth <= 0.0) {
    throw ValidationError("gripper template dimensions must be positive");
  }
  if (pad_rows < 1 || pad_cols < 1 || plate_rows < 1 || plate_cols < 1) {
    throw ValidationError("gripper template grids need at least one sample per axis");
  }
  if (marker_color.minCoeff() < 0.0 || marker_color.maxCoeff() > 1.0) {
    throw ValidationError("gripper marker color components must lie in [0, 1]");
  }
}

void HandObservation::validate() const {
  if (!finite(thumb_tip) || !finite(index_tip)) {
    throw ValidationError("hand fingertips must be finite");
  }
  if (wrist && !finite(*wrist)) throw ValidationError("hand wrist must be finite");
  if (!joints.empty() && joints.size() != 21) {
    throw ValidationError("full hand joint set must contain 21 points");
  }
  for (const auto& j : joints) {
    if (!finite(j)) throw ValidationError("hand joints must be finite");
  }
}

void GripperState::validate() const {
  if (opening < 0.0 || opening > 1.0) {
    throw ValidationError("gripper opening must lie in [0, 1]");
  }
  if (!finite(pose.translation) || !pose.rotation.coeffs().allFinite()) {
    throw ValidationError("gripper pose must be finite");
  }
}

PointCloud template_points(const GripperTemplate& t, double s) {
  t.validate();
  if (s < 0.0 || s > 1.0) throw RangeError("gripper opening outside [0, 1]");

  PointCloud cloud;
  const int total = 2 + 2 * t.points_per_pad() + t.plate_rows * t.plate_cols;
  cloud.points.reserve(total);

  cloud.points.push_back(t.left_tip(s));
  cloud.points.push_back(t.right_tip(s));

  // Pads hang from the tips toward -z; left pad mirrors right across y = 0.
  for (const double side : {+1.0, -1.0}) {
    const double y = side * 0.5 * s * t.max_open;
    for (int i = 0; i < t.pad_rows; ++i) {
      const double z = grid_coord(i, t.pad_rows, 0.0, -t.finger_length);
      for (int j = 0; j < t.pad_cols; ++j) {
        const double x = grid_coord(j, t.pad_cols, -0.5 * t.pad_width, 0.5 * t.pad_width);
        cloud.points.emplace_back(x, y, z);
      }
    }
  }

  // Back plate spans the full stroke in y; opening-independent.
  for (int i = 0; i < t.plate_rows; ++i) {
    const double y = grid_coord(i, t.plate_rows, -0.5 * t.max_open, 0.5 * t.max_open);
    for (int j = 0; j < t.plate_cols; ++j) {
      const double x = grid_coord(j, t.plate_cols, -0.5 * t.pad_width, 0.5 * t.pad_width);
      cloud.points.emplace_back(x, y, -t.finger_length);
    }
  }

  cloud.colors.assign(cloud.points.size(), t.marker_color);
  return cloud;
}

std::pair<GripperState, double> fit_gripper_from_fingertips(
    const HandObservation& hand, const GripperTemplate& t, bool swap_fingertips) {
  hand.validate();
  t.validate();

  const Eigen::Vector3d left_target = swap_fingertips ? hand.index_tip : hand.thumb_tip;
  const Eigen::Vector3d right_target = swap_fingertips ? hand.thumb_tip : hand.index_tip;

  const double separation = (left_target - right_target).norm();
  if (separation < 1e-6) {
    throw DegeneracyError("fingertips coincide, gripper pose is underdetermined");
  }

  const double s = std::clamp(separation / t.max_open, 0.0, 1.0);
  const Eigen::Vector3d mid = 0.5 * (left_target + right_target);
  const Eigen::Vector3d axis = (left_target - right_target).normalized();

  if (hand.wrist) {
    // The template anchor sits behind the TCP perpendicular to the tip axis;
    // the matching target lies toward the wrist, at the same depth.
    const Eigen::Vector3d toward_wrist = *hand.wrist - mid;
    const Eigen::Vector3d perp = toward_wrist - toward_wrist.dot(axis) * axis;
    if (perp.norm() > 1e-9) {
      const Eigen::Vector3d anchor_target = mid + t.anchor_depth * perp.normalized();
      const std::vector<Eigen::Vector3d> src{t.left_tip(s), t.right_tip(s), t.approach_anchor()};
      const std::vector<Eigen::Vector3d> dst{left_target, right_target, anchor_target};
      const RigidTransform pose = rigid_align(src, dst);

      double sq = 0.0;
      for (std::size_t i = 0; i < src.size(); ++i) {
        sq += (pose.apply(src[i]) - dst[i]).squaredNorm();
      }
      GripperState state;
      state.timestamp = hand.timestamp;
      state.pose = pose;
      state.opening = s;
      return {state, std::sqrt(sq / static_cast<double>(src.size()))};
    }
    // Wrist on the tip axis carries no roll information; fall through.
  }

  // No usable wrist: roll about the tip axis is free, so point the approach
  // axis as close to camera +z as the tip constraint allows.
  Eigen::Vector3d reference(0.0, 0.0, 1.0);
  Eigen::Vector3d approach = reference - reference.dot(axis) * axis;
  if (approach.norm() < 1e-9) {
    reference = Eigen::Vector3d(1.0, 0.0, 0.0);
    approach = reference - reference.dot(axis) * axis;
  }
  approach.normalize();

  Eigen::Matrix3d rot;
  rot.col(0) = axis.cross(approach);
  rot.col(1) = axis;
  rot.col(2) = approach;

  GripperState state;
  state.timestamp = hand.timestamp;
  state.pose = RigidTransform(Eigen::Quaterniond(rot), mid);
  state.opening = s;

  // Only the tips constrain this branch; each misses by half the clamped
  // separation excess.
  const double tip_error = 0.5 * std::abs(s * t.max_open - separation);
  return {state, tip_error};
}

PointCloud assemble_hybrid(const PointCloud& bg, const GripperState& state,
                           const GripperTemplate& t) {
  state.validate();
  const PointCloud gripper = transform_cloud(state.pose, template_points(t, state.opening));

  PointCloud out;
  out.points.reserve(bg.size() + gripper.size());
  out.points = bg.points;
  out.points.insert(out.points.end(), gripper.points.begin(), gripper.points.end());

  out.colors.reserve(out.points.size());
  if (bg.has_colors()) {
    out.colors = bg.colors;
  } else {
    out.colors.assign(bg.size(), Eigen::Vector3d(0.5, 0.5, 0.5));
  }
  out.colors.insert(out.colors.end(), gripper.colors.begin(), gripper.colors.end());
  return out;
}

} // namespace embridge
