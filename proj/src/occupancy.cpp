#include "embridge/occupancy.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace embridge {

void CollisionPrimitive::validate() const {
  switch (kind) {
    case PrimitiveKind::kSphere:
      if (radius <= 0.0) throw ValidationError("sphere primitive with non-positive radius");
      break;
    case PrimitiveKind::kCapsule:
      if (radius <= 0.0 || length <= 0.0) {
        throw ValidationError("capsule primitive with non-positive radius or length");
      }
      break;
    case PrimitiveKind::kBox:
      if (size.minCoeff() <= 0.0) throw ValidationError("box primitive with non-positive size");
      break;
  }
}

double signed_distance(const CollisionPrimitive& prim, const Eigen::Vector3d& p) {
  switch (prim.kind) {
    case PrimitiveKind::kSphere:
      return p.norm() - prim.radius;
    case PrimitiveKind::kCapsule: {
      const double h = 0.5 * prim.length;
      const double z = p.z() - std::clamp(p.z(), -h, h);
      return Eigen::Vector3d(p.x(), p.y(), z).norm() - prim.radius;
    }
    case PrimitiveKind::kBox: {
      const Eigen::Vector3d half = 0.5 * prim.size;
      const Eigen::Vector3d q = p.cwiseAbs() - half;
      const double outside = q.cwiseMax(0.0).norm();
      const double inside = std::min(q.maxCoeff(), 0.0);
      return outside + inside;
    }
  }
  return std::numeric_limits<double>::infinity();
}

void OccupancyModel::validate(const KinematicChain& chain) const {
  for (const auto& [link, prims] : links) {
    if (!chain.has_link(link)) {
      throw ValidationError("occupancy model references unknown link '" + link + "'");
    }
    for (const auto& prim : prims) prim.validate();
  }
}

double occupancy_distance(const OccupancyModel& model,
                          const std::map<std::string, RigidTransform>& link_poses,
                          const Eigen::Vector3d& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [link, prims] : model.links) {
    const auto it = link_poses.find(link);
    if (it == link_poses.end()) {
      throw ValidationError("no pose provided for occupancy link '" + link + "'");
    }
    for (const auto& prim : prims) {
      const RigidTransform world = it->second * prim.local_pose;
      const Eigen::Vector3d p_local = invert(world).apply(p);
      best = std::min(best, signed_distance(prim, p_local));
    }
  }
  return best;
}

bool point_in_occupancy(const OccupancyModel& model,
                        const std::map<std::string, RigidTransform>& link_poses,
                        const Eigen::Vector3d& p, double margin) {
  if (margin < 0.0) throw ValidationError("occupancy margin must be non-negative");
  return occupancy_distance(model, link_poses, p) <= margin;
}

namespace {

Eigen::Vector3d vec3_from_json(const nlohmann::json& j, const std::string& context) {
  if (!j.is_array() || j.size() != 3) {
    throw ValidationError(context + ": expected an array of three numbers");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

} // namespace

OccupancyModel parse_occupancy(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("occupancy sidecar is not valid JSON: ") + e.what());
  }
  if (!doc.contains("links") || !doc["links"].is_object()) {
    throw ValidationError("occupancy sidecar has no \"links\" object");
  }

  OccupancyModel model;
  for (const auto& [link, prim_list] : doc["links"].items()) {
    std::vector<CollisionPrimitive> prims;
    for (const auto& entry : prim_list) {
      CollisionPrimitive prim;
      const std::string kind = entry.value("kind", "");
      if (kind == "sphere") {
        prim.kind = PrimitiveKind::kSphere;
        prim.radius = entry.value("radius", 0.0);
      } else if (kind == "capsule") {
        prim.kind = PrimitiveKind::kCapsule;
        prim.radius = entry.value("radius", 0.0);
        prim.length = entry.value("length", 0.0);
      } else if (kind == "box") {
        prim.kind = PrimitiveKind::kBox;
        prim.size = vec3_from_json(entry.at("size"), "box size for link '" + link + "'");
      } else {
        throw ValidationError("occupancy link '" + link + "': unknown primitive kind '" + kind + "'");
      }
      Eigen::Vector3d xyz = Eigen::Vector3d::Zero();
      Eigen::Vector3d rpy = Eigen::Vector3d::Zero();
      if (entry.contains("xyz")) xyz = vec3_from_json(entry["xyz"], "primitive xyz");
      if (entry.contains("rpy")) rpy = vec3_from_json(entry["rpy"], "primitive rpy");
      prim.local_pose = RigidTransform::from_rpy(xyz, rpy);
      prim.validate();
      prims.push_back(prim);
    }
    model.links[link] = std::move(prims);
  }
  return model;
}

OccupancyModel load_occupancy(const std::filesystem::path& path) {
  std::ifstream file(path);
  if (!file) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << file.rdbuf();
  return parse_occupancy(buffer.str());
}

} // namespace embridge
