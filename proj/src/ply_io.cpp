#include "embridge/ply_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace embridge {

namespace {

std::uint8_t to_byte(double channel) {
  const double v = std::clamp(channel, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

// Shortest float representation that round-trips; keeps output deterministic.
void append_float(std::string& out, float value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  out.append(buf, res.ptr);
}

} // namespace

void write_ply(const std::filesystem::path& path, const PointCloud& cloud) {
  cloud.validate();
  std::ofstream file(path);
  if (!file) throw IoError("cannot open " + path.string() + " for writing");

  file << "ply\nformat ascii 1.0\n";
  file << "element vertex " << cloud.points.size() << "\n";
  file << "property float x\nproperty float y\nproperty float z\n";
  if (cloud.has_colors()) {
    file << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  }
  file << "end_header\n";

  std::string line;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    line.clear();
    const auto& p = cloud.points[i];
    append_float(line, static_cast<float>(p.x()));
    line.push_back(' ');
    append_float(line, static_cast<float>(p.y()));
    line.push_back(' ');
    append_float(line, static_cast<float>(p.z()));
    if (cloud.has_colors()) {
      const auto& c = cloud.colors[i];
      line += ' ' + std::to_string(to_byte(c.x()));
      line += ' ' + std::to_string(to_byte(c.y()));
      line += ' ' + std::to_string(to_byte(c.z()));
    }
    line.push_back('\n');
    file << line;
  }
  if (!file) throw IoError("failed while writing " + path.string());
}

PointCloud read_ply(const std::filesystem::path& path) {
  std::ifstream file(path);
  if (!file) throw IoError("cannot open " + path.string());

  std::string line;
  if (!std::getline(file, line) || line != "ply") throw IoError(path.string() + ": not a PLY file");

  std::size_t vertex_count = 0;
  std::vector<std::string> properties;
  bool in_vertex_element = false;
  bool ascii = false;
  while (std::getline(file, line)) {
    std::istringstream ss(line);
    std::string token;
    ss >> token;
    if (token == "format") {
      std::string fmt;
      ss >> fmt;
      ascii = (fmt == "ascii");
    } else if (token == "element") {
      std::string name;
      ss >> name >> vertex_count;
      if (name != "vertex") throw IoError(path.string() + ": unsupported element '" + name + "'");
      in_vertex_element = true;
    } else if (token == "property" && in_vertex_element) {
      std::string type, name;
      ss >> type >> name;
      properties.push_back(name);
    } else if (token == "end_header") {
      break;
    } else if (token == "comment" || token.empty()) {
      continue;
    }
  }
  if (!ascii) throw IoError(path.string() + ": only ASCII PLY is supported");

  const std::vector<std::string> xyz = {"x", "y", "z"};
  const std::vector<std::string> xyzrgb = {"x", "y", "z", "red", "green", "blue"};
  const bool with_colors = properties == xyzrgb;
  if (!with_colors && properties != xyz) {
    throw IoError(path.string() + ": expected x y z [red green blue] vertex properties");
  }

  PointCloud cloud;
  cloud.points.reserve(vertex_count);
  if (with_colors) cloud.colors.reserve(vertex_count);
  for (std::size_t i = 0; i < vertex_count; ++i) {
    if (!std::getline(file, line)) throw IoError(path.string() + ": truncated vertex data");
    std::istringstream ss(line);
    double x, y, z;
    if (!(ss >> x >> y >> z)) throw IoError(path.string() + ": malformed vertex line");
    cloud.points.emplace_back(x, y, z);
    if (with_colors) {
      int r, g, b;
      if (!(ss >> r >> g >> b)) throw IoError(path.string() + ": malformed color entry");
      cloud.colors.emplace_back(r / 255.0, g / 255.0, b / 255.0);
    }
  }
  return cloud;
}

} // namespace embridge
