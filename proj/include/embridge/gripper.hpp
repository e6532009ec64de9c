#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "embridge/geometry.hpp"

namespace embridge {

/// Schematic parallel-jaw gripper sampled as points in its own frame.
///
/// Frame convention: origin at the tool center point (the midpoint between
/// the fingertips), y along the closing axis, +z the approach direction, so
/// the body extends toward -z. Tips sit at (0, ±s·max_open/2, 0); the
/// approach anchor at (0, 0, -anchor_depth) pins down the roll about the
/// tip-to-tip axis during fitting.
struct GripperTemplate {
  double max_open = 0.085;     // tip separation at s = 1, meters
  double finger_length = 0.05; // pad extent toward -z
  double pad_width = 0.02;     // pad extent along x
  int pad_rows = 6;            // samples along the finger
  int pad_cols = 3;            // samples across the pad
  int plate_rows = 3;          // back plate grid along y
  int plate_cols = 5;          // back plate grid along x
  double anchor_depth = 0.09;  // anchor distance behind the tip midpoint
  Eigen::Vector3d marker_color{1.0, 0.0, 1.0};

  int points_per_pad() const { return pad_rows * pad_cols; }

  Eigen::Vector3d left_tip(double s) const { return {0.0, 0.5 * s * max_open, 0.0}; }
  Eigen::Vector3d right_tip(double s) const { return {0.0, -0.5 * s * max_open, 0.0}; }
  Eigen::Vector3d approach_anchor() const { return {0.0, 0.0, -anchor_depth}; }

  void validate() const;
};

/// Fingertip observation in the camera frame, meters.
struct HandObservation {
  double timestamp = 0.0;
  Eigen::Vector3d thumb_tip{0, 0, 0};
  Eigen::Vector3d index_tip{0, 0, 0};
  std::optional<Eigen::Vector3d> wrist;
  std::vector<Eigen::Vector3d> joints; // optional full set, 21 when present

  void validate() const;
};

/// Equivalent end-effector state: TCP pose in camera frame plus normalized
/// opening in [0, 1].
struct GripperState {
  double timestamp = 0.0;
  RigidTransform pose;
  double opening = 0.0;

  void validate() const;
};

/// Template cloud at opening s, in the gripper frame, every point carrying
/// the marker color. Layout order: left tip, right tip, left pad grid, right
/// pad grid, back plate. Identical inputs give bit-identical clouds.
/// s outside [0, 1] raises RangeError.
PointCloud template_points(const GripperTemplate& t, double s);

/// Recovers (pose, opening) from fingertips: opening in closed form from tip
/// separation (clamped to [0, 1]), then a three-point rigid alignment of
/// {left tip, right tip, anchor} onto {thumb, index, wrist-derived anchor}.
/// Without a wrist the roll about the tip axis is chosen so the approach
/// axis lies closest to camera +z. swap_fingertips flips the thumb/index to
/// left/right pairing for mirrored hands. Returns the fitted state and the
/// RMS point residual in meters. Coincident tips (within 1e-6 m) raise
/// DegeneracyError.
std::pair<GripperState, double> fit_gripper_from_fingertips(
    const HandObservation& hand, const GripperTemplate& t,
    bool swap_fingertips = false);

/// Concatenates the background with the posed template: bg points first,
/// then gripper points in template order with the marker color. Background
/// points missing colors are filled neutral gray so the output is uniformly
/// colored.
PointCloud assemble_hybrid(const PointCloud& bg, const GripperState& state,
                           const GripperTemplate& t);

} // namespace embridge
