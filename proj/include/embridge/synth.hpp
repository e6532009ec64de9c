#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "embridge/geometry.hpp"

namespace embridge {

struct SynthConfig {
  int image_size = 32;
  int n_sequences = 200;
  int frames_per_seq = 16;
  /// Per-pixel gray-level bound on the robot variant's deviation from the
  /// pseudo variant.
  double photometric_shift = 14.0;
  /// Fraction of stage-1 frames rendered in the no-object free-motion
  /// style; realized as appended frames, at least one whenever positive.
  double free_motion_fraction = 0.004;
  std::uint64_t seed = 97;

  void validate() const;
};

/// One world state rendered three ways: hand glyph, gripper glyph at the
/// same pose, and the gripper render with a bounded photometric shift.
struct SynthFrame {
  GrayImage hand;
  GrayImage pseudo;
  GrayImage robot;
  int sequence_id = 0;
  int frame_index = 0;
  int center_x = 0; // agent-object contact pixel
  int center_y = 0;
  bool free_motion = false;
  // Inclusive bounds of every pixel either agent glyph painted; the two
  // variants of a pair are identical outside this box.
  int glyph_min_x = 0, glyph_min_y = 0, glyph_max_x = -1, glyph_max_y = -1;
};

struct PairedFrameSet {
  int image_size = 0;
  std::vector<SynthFrame> frames;

  void validate() const;
};

PairedFrameSet synthesize_pairs(const SynthConfig& cfg);
PairedFrameSet synthesize_pairs(std::uint64_t world_seed, int n_sequences, int frames_per_seq);

/// Dataset directory: one 8-bit PNG per variant per frame plus
/// manifest.json recording pairing, centers, and glyph boxes. Round-trips
/// losslessly.
void write_dataset(const std::filesystem::path& dir, const PairedFrameSet& set);
PairedFrameSet read_dataset(const std::filesystem::path& dir);

} // namespace embridge
