#pragma once

#include <filesystem>
#include <string>

#include "embridge/geometry.hpp"
#include "embridge/gripper.hpp"
#include "embridge/synth.hpp"
#include "embridge/train.hpp"

namespace embridge {

/// Everything the command-line front end reads from its single JSON config.
/// Every field has a working default; absent keys keep defaults, unknown
/// keys raise ConfigError naming the offender.
struct ToolConfig {
  CameraIntrinsics camera{200.0, 200.0, 79.5, 59.5, 160, 120, 0.001};
  double filter_margin = 0.01;
  /// Robot base pose in the camera frame (qw qx qy qz tx ty tz).
  RigidTransform robot_base;
  GripperTemplate gripper;
  bool swap_fingertips = false;
  TrainConfig train;
  SynthConfig synth;
  // Dataset sizes for the distillation run; stage 1 uses the synth block's
  // counts, these cover the second stage and the held-out evaluation split.
  int stage2_sequences = 200;
  int stage2_frames = 16;
  int holdout_sequences = 20;
  int holdout_frames = 10;

  void validate() const;
};

ToolConfig default_config();
ToolConfig parse_config(const std::string& json_text);
ToolConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ToolConfig& cfg);

} // namespace embridge
