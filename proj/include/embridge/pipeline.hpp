#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "embridge/config.hpp"
#include "embridge/gripper.hpp"
#include "embridge/kinematics.hpp"

namespace embridge {

inline constexpr const char* kToolVersion = "0.1.0";

/// One line of frames.jsonl. A frame carries exactly one kind of embodiment
/// evidence: mask path + hand observation (human side) or joint state +
/// gripper state (robot side); mixing or missing both is invalid.
struct FrameRecord {
  double timestamp = 0.0;
  std::string depth;
  std::string color; // optional
  std::string mask;  // optional, human side
  std::optional<HandObservation> hand;
  std::optional<JointState> joints;
  std::optional<GripperState> gripper;

  bool human_evidence() const { return !mask.empty() && hand.has_value(); }
  bool robot_evidence() const { return joints.has_value() && gripper.has_value(); }
  void validate() const;
};

/// A frame that failed to parse keeps its error instead of a record, so
/// runs can skip and report it rather than abort.
struct ParsedFrame {
  std::optional<FrameRecord> record;
  std::string error;
};

std::vector<ParsedFrame> read_frames_jsonl(const std::filesystem::path& path);

struct FrameStatus {
  int index = 0;
  bool converted = false;
  std::string detail;
};

struct RunManifest {
  std::string command;
  std::string config_path;
  std::string input_dir;
  std::string output_dir;
  std::string version = kToolVersion;
  std::uint64_t seed = 0;
  std::vector<FrameStatus> frames;

  std::size_t converted_count() const;
  std::size_t failed_count() const;
  void write(const std::filesystem::path& path) const;
};

/// exit_code: 0 all frames converted, 1 some frames failed, 2 run-level
/// failure (also signalled by thrown Error before outputs exist).
struct RunResult {
  int exit_code = 0;
  RunManifest manifest;
};

RunResult cmd_align_human(const std::filesystem::path& input_dir,
                          const std::filesystem::path& output_dir, const ToolConfig& cfg,
                          const std::string& config_path, int jobs, std::ostream& log);

RunResult cmd_align_robot(const std::filesystem::path& input_dir,
                          const std::filesystem::path& urdf_path,
                          const std::filesystem::path& occupancy_path,
                          const std::filesystem::path& output_dir, const ToolConfig& cfg,
                          const std::string& config_path, std::optional<double> margin_override,
                          int jobs, std::ostream& log);

RunResult cmd_distill(const ToolConfig& cfg, const std::string& config_path,
                      const std::filesystem::path& output_dir, std::ostream& log);

RunResult cmd_analyze(const std::filesystem::path& encoder_dir,
                      const std::filesystem::path& dataset_dir,
                      const std::filesystem::path& output_dir, std::ostream& log);

RunResult cmd_synth_data(const ToolConfig& cfg, const std::string& config_path,
                         const std::filesystem::path& output_dir, std::ostream& log);

} // namespace embridge
