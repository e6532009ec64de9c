#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "embridge/distill.hpp"
#include "embridge/encoder.hpp"
#include "embridge/synth.hpp"

namespace embridge {

struct TrainConfig {
  DistillConfig distill;
  EncoderDims encoder;
  int steps_stage1 = 24000;
  int steps_stage2 = 24000;
  double learning_rate = 0.05;
  int batch_pairs = 4;
  int local_crops = 2;
  /// Probability that a local student view is interaction-centered rather
  /// than uniformly placed; 1 in stage 1, 0 in stage 2 by default.
  double roint_prob_stage1 = 1.0;
  double roint_prob_stage2 = 0.0;
  double crop_scale_lo = 0.35;
  double crop_scale_hi = 0.75;
  /// Learning-rate multiplier for the shared patch layer relative to the
  /// output projections. Values below 1 keep the student close to the
  /// teacher's patch-level machinery (which both domains share) while the
  /// heads learn the cross-domain feature remapping; 1 trains all blocks
  /// uniformly, 0 freezes the patch layer outright.
  double trunk_lr_scale = 1.0;
  std::uint64_t seed = 7;

  void validate() const;
};

struct TraceRow {
  int step = 0;
  double dino = 0.0;
  double ibot = 0.0;
  double koleo = 0.0;
  double total = 0.0;
};

struct TrainTrace {
  std::vector<TraceRow> rows;
  std::uint64_t seed = 0;
};

void write_trace_csv(const std::filesystem::path& path, const TrainTrace& trace);
TrainTrace read_trace_csv(const std::filesystem::path& path);

/// One local-view crop decision, exposed separately so tests can exercise
/// the exact sampling the trainer uses. aimed_x/aimed_y is where the crop
/// was pointed before the in-bounds shift.
struct LocalCropDraw {
  CropRect rect;
  int aimed_x = 0;
  int aimed_y = 0;
  bool roint = false;
};

LocalCropDraw sample_local_crop(int image_size, int stage, double roint_prob,
                                int interaction_x, int interaction_y,
                                double scale_lo, double scale_hi, Rng& rng);

/// One frozen-teacher stage: gradient descent on the student against
/// total_loss over sampled pairs. Stage 1 reads (hand -> teacher,
/// gripper -> student) views; stage 2 reads (gripper -> teacher,
/// photometrically shifted gripper -> student). The teacher is never
/// written. Fully deterministic in (cfg, pairs, seed).
TrainTrace distill_stage(const ToyEncoder& teacher, ToyEncoder& student,
                         const PairedFrameSet& pairs, const TrainConfig& cfg,
                         int stage, int steps, std::uint64_t seed);

struct TransitiveResult {
  ToyEncoder e_h;
  ToyEncoder e_p;
  ToyEncoder e_r;
  TrainTrace trace1;
  TrainTrace trace2;
};

/// Both stages chained: E_H is the untouched random-init teacher, E_P its
/// stage-1 student, E_R the stage-2 student initialized from E_P's final
/// weights with E_P frozen as the second teacher.
TransitiveResult run_transitive(const PairedFrameSet& pairs_stage1,
                                const PairedFrameSet& pairs_stage2,
                                const TrainConfig& cfg);

} // namespace embridge
