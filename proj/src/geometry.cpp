#include "embridge/geometry.hpp"

#include <cmath>

namespace embridge {

RigidTransform RigidTransform::from_rpy(const Eigen::Vector3d& xyz,
                                        const Eigen::Vector3d& rpy) {
  const Eigen::Quaterniond q =
      Eigen::AngleAxisd(rpy.x(), Eigen::Vector3d::UnitX()) *
      Eigen::AngleAxisd(rpy.y(), Eigen::Vector3d::UnitY()) *
      Eigen::AngleAxisd(rpy.z(), Eigen::Vector3d::UnitZ());
  return {q, xyz};
}

RigidTransform RigidTransform::from_axis_angle(const Eigen::Vector3d& axis,
                                               double angle,
                                               const Eigen::Vector3d& t) {
  return {Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis.normalized())), t};
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  RigidTransform out;
  out.rotation = (a.rotation * b.rotation).normalized();
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

RigidTransform invert(const RigidTransform& t) {
  RigidTransform out;
  out.rotation = t.rotation.conjugate();
  out.translation = -(out.rotation * t.translation);
  return out;
}

double quaternion_distance(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b) {
  const Eigen::Vector4d va(a.w(), a.x(), a.y(), a.z());
  const Eigen::Vector4d vb(b.w(), b.x(), b.y(), b.z());
  return std::min((va - vb).norm(), (va + vb).norm());
}

void PointCloud::validate() const {
  if (!colors.empty() && colors.size() != points.size()) {
    throw ValidationError("point cloud has " + std::to_string(points.size()) +
                          " points but " + std::to_string(colors.size()) + " colors");
  }
  for (const auto& p : points) {
    if (!p.allFinite()) throw ValidationError("point cloud contains non-finite coordinates");
  }
  for (const auto& c : colors) {
    if (!c.allFinite()) throw ValidationError("point cloud contains non-finite colors");
  }
}

PointCloud transform_cloud(const RigidTransform& t, const PointCloud& cloud) {
  PointCloud out;
  out.points.reserve(cloud.points.size());
  const Eigen::Matrix3d r = t.rotation_matrix();
  for (const auto& p : cloud.points) out.points.push_back(r * p + t.translation);
  out.colors = cloud.colors;
  return out;
}

void CameraIntrinsics::validate() const {
  if (fx <= 0.0 || fy <= 0.0) throw ValidationError("camera focal lengths must be positive");
  if (width <= 0 || height <= 0) throw ValidationError("camera image size must be positive");
  if (depth_scale <= 0.0) throw ValidationError("camera depth_scale must be positive");
}

PointCloud unproject(const DepthImage& depth, const CameraIntrinsics& intr,
                     const GrayImage* keep_mask, const RgbImage* color) {
  intr.validate();
  if (depth.width != intr.width || depth.height != intr.height) {
    throw ShapeError("depth image is " + std::to_string(depth.width) + "x" +
                     std::to_string(depth.height) + " but intrinsics expect " +
                     std::to_string(intr.width) + "x" + std::to_string(intr.height));
  }
  if (keep_mask && !depth.same_size(*keep_mask)) {
    throw ShapeError("keep mask dimensions do not match the depth image");
  }
  if (color && (color->width != depth.width || color->height != depth.height)) {
    throw ShapeError("color image dimensions do not match the depth image");
  }

  PointCloud out;
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      const std::uint16_t d = depth.at(u, v);
      if (d == 0) continue;
      if (keep_mask && keep_mask->at(u, v) == 0) continue;
      const double z = intr.depth_scale * static_cast<double>(d);
      out.points.emplace_back((u - intr.cx) * z / intr.fx, (v - intr.cy) * z / intr.fy, z);
      if (color) {
        const std::uint8_t* c = color->at(u, v);
        out.colors.emplace_back(c[0] / 255.0, c[1] / 255.0, c[2] / 255.0);
      }
    }
  }
  return out;
}

RigidTransform rigid_align(const std::vector<Eigen::Vector3d>& src,
                           const std::vector<Eigen::Vector3d>& dst) {
  if (src.size() != dst.size()) throw ShapeError("rigid_align: point counts differ");
  if (src.size() < 3) throw ValidationError("rigid_align needs at least 3 correspondences");

  Eigen::Vector3d src_centroid = Eigen::Vector3d::Zero();
  Eigen::Vector3d dst_centroid = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    src_centroid += src[i];
    dst_centroid += dst[i];
  }
  src_centroid /= static_cast<double>(src.size());
  dst_centroid /= static_cast<double>(dst.size());

  Eigen::Matrix3d cross = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    cross += (src[i] - src_centroid) * (dst[i] - dst_centroid).transpose();
  }

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  const Eigen::Matrix3d r = svd.matrixV() * d * svd.matrixU().transpose();

  RigidTransform out;
  out.rotation = Eigen::Quaterniond(r).normalized();
  out.translation = dst_centroid - r * src_centroid;
  return out;
}

} // namespace embridge
