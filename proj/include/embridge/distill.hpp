#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "embridge/errors.hpp"
#include "embridge/rng.hpp"

namespace embridge {

using FeatureVector = Eigen::VectorXd;

/// Knobs for the distillation objective. lambda weights the spread
/// regularizer; temperatures shape teacher/student softmax sharpness.
struct DistillConfig {
  double lambda = 0.1;
  double teacher_temp = 0.1;
  double student_temp = 0.1;
  int prototype_count = 256;
  double mask_ratio = 0.3;
  double koleo_epsilon = 1e-8;
  /// Teacher-center EMA momentum. The default is deliberately close to 1:
  /// with a frozen teacher the center cannot chase a moving collapse mode,
  /// and aggressive centering would strip the teacher's shared response
  /// mass from the targets — exactly the component a cross-domain student
  /// must inherit for anchor similarity to transfer.
  double center_momentum = 0.99999;

  void validate() const;
};

/// Fixed projection of features onto K prototype logits plus the running
/// center subtracted from teacher logits. Center updates are single-writer.
///
/// Features are L2-normalized before the projection so the logit scale is
/// bounded by the prototype row norms and the softmax temperatures keep a
/// consistent meaning regardless of encoder feature magnitude.
struct PrototypeHead {
  Eigen::MatrixXd weights; // K x D
  Eigen::VectorXd center;  // K
  double center_momentum = 0.9;

  static PrototypeHead random_init(int prototypes, int dim, std::uint64_t seed);

  Eigen::VectorXd logits(const FeatureVector& f) const {
    return weights * (f / std::max(f.norm(), 1e-12));
  }

  void validate() const;
};

struct StudentView {
  FeatureVector features;
  bool is_local_crop = false;
  int teacher_index = 0; // pairing into DistillBatch::teacher_global
};

/// Everything one objective evaluation consumes. Patch matrices are row-per
/// patch; patch_mask nonzero = masked. student_batch_embeddings rows feed
/// the spread regularizer.
struct DistillBatch {
  std::vector<FeatureVector> teacher_global;
  std::vector<StudentView> student_views;
  Eigen::MatrixXd teacher_patches;
  Eigen::MatrixXd student_patch_preds;
  std::vector<std::uint8_t> patch_mask;
  Eigen::MatrixXd student_batch_embeddings;

  void validate(const PrototypeHead& head) const;
};

struct LossGrad {
  double loss = 0.0;
  Eigen::VectorXd grad; // wrt student logits, length K
};

/// Cross-entropy between the centered, sharpened teacher distribution
/// (constant) and the student distribution. Gradient is wrt student logits:
/// (p_student - p_teacher) / student_temp.
LossGrad dino_loss(const PrototypeHead& head, const FeatureVector& teacher,
                   const FeatureVector& student, const DistillConfig& cfg);

struct PatchLossGrad {
  double loss = 0.0;
  Eigen::MatrixXd grad; // P x K wrt student patch logits, zero rows unmasked
};

/// Masked-patch prediction: the dino cross-entropy applied per masked patch
/// through the same head, averaged over masked positions. Unmasked patches
/// contribute nothing. Throws ValidationError when nothing is masked.
PatchLossGrad ibot_loss(const PrototypeHead& head,
                        const Eigen::MatrixXd& teacher_patches,
                        const Eigen::MatrixXd& student_patch_preds,
                        const std::vector<std::uint8_t>& patch_mask,
                        const DistillConfig& cfg);

struct KoleoResult {
  double loss = 0.0;
  Eigen::MatrixXd grad; // B x D wrt the raw (un-normalized) embeddings
};

/// Nearest-neighbor differential-entropy proxy on L2-normalized rows:
/// -(1/B) sum_i log(min_{j != i} |x_i - x_j| + eps). The neighbor index is
/// treated as locally constant; the gradient chains through normalization.
KoleoResult koleo_loss(const Eigen::MatrixXd& embeddings, double epsilon);

struct TotalLossResult {
  double total = 0.0;
  double dino = 0.0;  // mean over student views
  double ibot = 0.0;
  double koleo = 0.0; // unweighted value; total adds lambda * koleo
  std::vector<Eigen::VectorXd> view_logit_grads; // per student view
  Eigen::MatrixXd patch_logit_grads;
  Eigen::MatrixXd embedding_grads; // lambda-weighted
};

/// Full objective: mean per-view cross-entropy, plus the patch term and
/// lambda-weighted spread term when at least one student view is a full
/// image. A batch of only local crops gets the cross-entropy term alone,
/// with exactly zero patch/spread contributions. Teacher quantities never
/// receive gradients.
TotalLossResult total_loss(const DistillBatch& batch, const PrototypeHead& head,
                           const DistillConfig& cfg);

/// Exponential-moving-average center update from a batch of raw teacher
/// logits (rows = samples): center <- m * center + (1 - m) * mean.
void update_center(PrototypeHead& head, const Eigen::MatrixXd& teacher_logit_batch);

struct CropRect {
  int x = 0;
  int y = 0;
  int size = 0;

  bool contains(int px, int py) const {
    return px >= x && px < x + size && py >= y && py < y + size;
  }
};

/// Square crop whose side is a uniform fraction (from scale_range) of the
/// short image side, centered on (center_x, center_y) and shifted just
/// enough to stay inside the image. Deterministic for a fixed seed.
CropRect roint_crop(int image_width, int image_height, int center_x, int center_y,
                    double scale_lo, double scale_hi, std::uint64_t seed);

/// Contiguous-block patch masking over a rows x cols patch grid; at least
/// ceil(ratio * patches) positions end up masked, always at least one.
std::vector<std::uint8_t> sample_block_mask(int patch_rows, int patch_cols,
                                            double mask_ratio, Rng& rng);

} // namespace embridge
