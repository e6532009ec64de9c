#include "embridge/kinematics.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <deque>
#include <set>
#include <sstream>

namespace embridge {

namespace pt = boost::property_tree;

const char* to_string(JointKind kind) {
  switch (kind) {
    case JointKind::kFixed: return "fixed";
    case JointKind::kRevolute: return "revolute";
    case JointKind::kPrismatic: return "prismatic";
  }
  return "?";
}

bool KinematicChain::has_link(const std::string& name) const {
  for (const auto& l : links) {
    if (l == name) return true;
  }
  return false;
}

const Joint* KinematicChain::find_joint(const std::string& name) const {
  for (const auto& j : joints) {
    if (j.name == name) return &j;
  }
  return nullptr;
}

namespace {

Eigen::Vector3d parse_vec3(const std::string& text, const std::string& context) {
  std::istringstream ss(text);
  Eigen::Vector3d v;
  if (!(ss >> v.x() >> v.y() >> v.z())) {
    throw ValidationError(context + ": expected three numbers, got '" + text + "'");
  }
  return v;
}

void reject_meshes(const pt::ptree& link_node, const std::string& link_name) {
  for (const auto& [key, child] : link_node) {
    if (key != "visual" && key != "collision") continue;
    if (auto geometry = child.get_child_optional("geometry")) {
      if (geometry->get_child_optional("mesh")) {
        throw UnsupportedFeatureError("link '" + link_name +
                                      "': mesh geometry is not supported; use an occupancy sidecar");
      }
    }
  }
}

} // namespace

KinematicChain parse_chain(const std::string& xml_text) {
  pt::ptree doc;
  try {
    std::istringstream stream(xml_text);
    pt::read_xml(stream, doc, pt::xml_parser::trim_whitespace);
  } catch (const pt::xml_parser_error& e) {
    throw StructureError(std::string("malformed robot description: ") + e.what());
  }

  auto robot = doc.get_child_optional("robot");
  if (!robot) throw StructureError("robot description has no <robot> element");

  KinematicChain chain;
  for (const auto& [key, node] : *robot) {
    if (key == "link") {
      const auto name = node.get_optional<std::string>("<xmlattr>.name");
      if (!name) throw ValidationError("link without a name attribute");
      chain.links.push_back(*name);
      reject_meshes(node, *name);
    } else if (key == "joint") {
      Joint joint;
      joint.name = node.get<std::string>("<xmlattr>.name", "");
      if (joint.name.empty()) throw ValidationError("joint without a name attribute");
      const auto type = node.get<std::string>("<xmlattr>.type", "");
      if (type == "fixed") {
        joint.kind = JointKind::kFixed;
      } else if (type == "revolute") {
        joint.kind = JointKind::kRevolute;
      } else if (type == "prismatic") {
        joint.kind = JointKind::kPrismatic;
      } else {
        throw UnsupportedFeatureError("joint '" + joint.name + "': unsupported joint kind '" +
                                      type + "'");
      }
      if (node.get_child_optional("mimic")) {
        throw UnsupportedFeatureError("joint '" + joint.name + "': mimic joints are not supported");
      }
      joint.parent = node.get<std::string>("parent.<xmlattr>.link", "");
      joint.child = node.get<std::string>("child.<xmlattr>.link", "");
      if (joint.parent.empty() || joint.child.empty()) {
        throw ValidationError("joint '" + joint.name + "': missing parent or child link");
      }
      Eigen::Vector3d xyz = Eigen::Vector3d::Zero();
      Eigen::Vector3d rpy = Eigen::Vector3d::Zero();
      if (auto origin = node.get_child_optional("origin")) {
        if (auto s = origin->get_optional<std::string>("<xmlattr>.xyz")) {
          xyz = parse_vec3(*s, "joint '" + joint.name + "' origin xyz");
        }
        if (auto s = origin->get_optional<std::string>("<xmlattr>.rpy")) {
          rpy = parse_vec3(*s, "joint '" + joint.name + "' origin rpy");
        }
      }
      joint.origin = RigidTransform::from_rpy(xyz, rpy);
      if (auto axis = node.get_child_optional("axis")) {
        const auto s = axis->get_optional<std::string>("<xmlattr>.xyz");
        if (!s) throw ValidationError("joint '" + joint.name + "': axis without xyz");
        joint.axis = parse_vec3(*s, "joint '" + joint.name + "' axis");
        const double norm = joint.axis.norm();
        if (norm < 1e-12) throw ValidationError("joint '" + joint.name + "': zero-length axis");
        joint.axis /= norm;
      } else if (joint.moving()) {
        throw ValidationError("joint '" + joint.name + "': moving joint without an axis");
      }
      if (auto limit = node.get_child_optional("limit")) {
        const auto lower = limit->get_optional<double>("<xmlattr>.lower");
        const auto upper = limit->get_optional<double>("<xmlattr>.upper");
        if (lower && upper) {
          if (*lower > *upper) {
            throw ValidationError("joint '" + joint.name + "': limit lower > upper");
          }
          joint.limits = {{*lower, *upper}};
        }
      }
      chain.joints.push_back(std::move(joint));
    } else if (key == "transmission") {
      throw UnsupportedFeatureError("transmissions are not supported");
    }
  }

  chain.validate();
  return chain;
}

void KinematicChain::validate() {
  if (links.empty()) throw StructureError("robot description has no links");

  std::set<std::string> link_set(links.begin(), links.end());
  if (link_set.size() != links.size()) throw StructureError("duplicate link names");

  std::map<std::string, int> parent_joint_count;
  for (const auto& j : joints) {
    if (j.parent == j.child) {
      throw StructureError("joint '" + j.name + "': parent equals child ('" + j.parent + "')");
    }
    if (!link_set.count(j.parent)) {
      throw StructureError("joint '" + j.name + "': unknown parent link '" + j.parent + "'");
    }
    if (!link_set.count(j.child)) {
      throw StructureError("joint '" + j.name + "': unknown child link '" + j.child + "'");
    }
    if (++parent_joint_count[j.child] > 1) {
      throw StructureError("link '" + j.child + "' has more than one parent joint");
    }
    if (std::abs(j.axis.norm() - 1.0) > 1e-9) {
      throw ValidationError("joint '" + j.name + "': axis is not unit length");
    }
    if (j.limits && (*j.limits)[0] > (*j.limits)[1]) {
      throw ValidationError("joint '" + j.name + "': limit lower > upper");
    }
  }

  std::vector<std::string> roots;
  for (const auto& l : links) {
    if (!parent_joint_count.count(l)) roots.push_back(l);
  }
  if (roots.empty()) throw StructureError("joint graph has a cycle (no base link)");
  if (roots.size() > 1) {
    std::string msg = "joint graph has multiple roots:";
    for (const auto& r : roots) msg += " '" + r + "'";
    throw StructureError(msg);
  }

  // Reachability from the root; an unreachable component implies a cycle.
  std::set<std::string> reached{roots.front()};
  std::deque<std::string> frontier{roots.front()};
  while (!frontier.empty()) {
    const std::string link = frontier.front();
    frontier.pop_front();
    for (const auto& j : joints) {
      if (j.parent == link && !reached.count(j.child)) {
        reached.insert(j.child);
        frontier.push_back(j.child);
      }
    }
  }
  if (reached.size() != links.size()) {
    throw StructureError("joint graph has a cycle or disconnected links");
  }
  base_link = roots.front();
}

std::vector<std::string> limit_warnings(const KinematicChain& chain, const JointState& q) {
  std::vector<std::string> warnings;
  for (const auto& j : chain.joints) {
    if (!j.moving() || !j.limits) continue;
    const auto it = q.values.find(j.name);
    if (it == q.values.end()) continue;
    if (it->second < (*j.limits)[0] || it->second > (*j.limits)[1]) {
      std::ostringstream ss;
      ss << "joint '" << j.name << "' value " << it->second << " outside limits ["
         << (*j.limits)[0] << ", " << (*j.limits)[1] << "]";
      warnings.push_back(ss.str());
    }
  }
  return warnings;
}

std::map<std::string, RigidTransform> forward_kinematics(const KinematicChain& chain,
                                                         const JointState& q,
                                                         const RigidTransform& base_pose) {
  for (const auto& j : chain.joints) {
    if (j.moving() && !q.values.count(j.name)) {
      throw ValidationError("missing joint value for '" + j.name + "'");
    }
  }

  std::map<std::string, RigidTransform> poses;
  poses[chain.base_link] = base_pose;

  // The chain is a validated tree, so repeated sweeps terminate; link counts
  // are small enough that this beats building an explicit adjacency index.
  std::deque<std::string> frontier{chain.base_link};
  while (!frontier.empty()) {
    const std::string link = frontier.front();
    frontier.pop_front();
    const RigidTransform parent_pose = poses.at(link);
    for (const auto& j : chain.joints) {
      if (j.parent != link) continue;
      RigidTransform motion;
      if (j.kind == JointKind::kRevolute) {
        motion = RigidTransform::from_axis_angle(j.axis, q.values.at(j.name));
      } else if (j.kind == JointKind::kPrismatic) {
        motion.translation = j.axis * q.values.at(j.name);
      }
      poses[j.child] = parent_pose * j.origin * motion;
      frontier.push_back(j.child);
    }
  }
  return poses;
}

} // namespace embridge
