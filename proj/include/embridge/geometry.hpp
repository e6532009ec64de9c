#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cstdint>
#include <vector>

#include "embridge/errors.hpp"

namespace embridge {

/// SE(3) pose stored as unit quaternion (w,x,y,z) plus translation in meters.
struct RigidTransform {
  Eigen::Quaterniond rotation{1.0, 0.0, 0.0, 0.0};
  Eigen::Vector3d translation{0.0, 0.0, 0.0};

  RigidTransform() = default;
  RigidTransform(const Eigen::Quaterniond& q, const Eigen::Vector3d& t)
      : rotation(q.normalized()), translation(t) {}

  static RigidTransform identity() { return {}; }

  /// Pose from a translation plus roll-pitch-yaw angles, intrinsic XYZ
  /// convention: R = Rx(roll) * Ry(pitch) * Rz(yaw).
  static RigidTransform from_rpy(const Eigen::Vector3d& xyz,
                                 const Eigen::Vector3d& rpy);

  static RigidTransform from_axis_angle(const Eigen::Vector3d& axis,
                                        double angle,
                                        const Eigen::Vector3d& t = Eigen::Vector3d::Zero());

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return rotation * p + translation;
  }

  Eigen::Matrix3d rotation_matrix() const { return rotation.toRotationMatrix(); }
};

/// a then-applied-after b: compose(a, b).apply(p) == a.apply(b.apply(p)).
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform invert(const RigidTransform& t);

inline RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) {
  return compose(a, b);
}

/// Double-cover-aware distance between unit quaternions: min(|a-b|, |a+b|).
double quaternion_distance(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b);

/// Unorganized point set in meters with optional per-point RGB in [0,1].
struct PointCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<Eigen::Vector3d> colors; // empty, or same length as points

  std::size_t size() const { return points.size(); }
  bool has_colors() const { return !colors.empty(); }

  /// Throws ValidationError on non-finite coordinates or a color/point
  /// length mismatch.
  void validate() const;
};

PointCloud transform_cloud(const RigidTransform& t, const PointCloud& cloud);

/// Pinhole camera: x right, y down, z forward. depth_scale converts stored
/// 16-bit depth units to meters.
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;
  double depth_scale = 1.0;

  void validate() const;
};

template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  std::vector<T> pixels; // row-major

  Image() = default;
  Image(int w, int h, T fill = T{}) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  T& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  const T& at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }

  template <typename U>
  bool same_size(const Image<U>& other) const {
    return width == other.width && height == other.height;
  }
};

/// Depth in sensor units; 0 marks an invalid measurement.
using DepthImage = Image<std::uint16_t>;
using GrayImage = Image<std::uint8_t>;

/// Interleaved 8-bit RGB.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels; // 3 bytes per pixel, row-major

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::uint8_t* at(int x, int y) { return &pixels[(static_cast<std::size_t>(y) * width + x) * 3]; }
  const std::uint8_t* at(int x, int y) const { return &pixels[(static_cast<std::size_t>(y) * width + x) * 3]; }
};

/// Back-projects valid depth pixels to camera-frame points, row-major over
/// accepted pixels. keep_mask (nonzero = keep), when given, must match the
/// depth dimensions. color, when given, attaches per-point RGB.
PointCloud unproject(const DepthImage& depth, const CameraIntrinsics& intr,
                     const GrayImage* keep_mask = nullptr,
                     const RgbImage* color = nullptr);

/// Least-squares rigid alignment (rotation + translation, no scale) mapping
/// src onto dst; orthogonal-Procrustes via SVD of the cross-covariance with
/// determinant correction so the result is a proper rotation.
RigidTransform rigid_align(const std::vector<Eigen::Vector3d>& src,
                           const std::vector<Eigen::Vector3d>& dst);

} // namespace embridge
