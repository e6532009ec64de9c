#include "embridge/distill.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace embridge {

namespace {

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const Eigen::ArrayXd shifted = logits.array() - logits.maxCoeff();
  const Eigen::ArrayXd e = shifted.exp();
  return (e / e.sum()).matrix();
}

// Shared core of the global and patch objectives: cross-entropy between the
// constant teacher distribution and the student distribution, with the
// gradient wrt student logits.
LossGrad centered_cross_entropy(const PrototypeHead& head,
                                const Eigen::VectorXd& teacher_logits,
                                const Eigen::VectorXd& student_logits,
                                const DistillConfig& cfg) {
  const Eigen::VectorXd p_t =
      softmax((teacher_logits - head.center) / cfg.teacher_temp);
  const Eigen::VectorXd student_scaled = student_logits / cfg.student_temp;
  // log-softmax, stabilized.
  const double m = student_scaled.maxCoeff();
  const Eigen::ArrayXd shifted = student_scaled.array() - m;
  const double log_z = std::log(shifted.exp().sum());
  const Eigen::VectorXd log_p_s = (shifted - log_z).matrix();
  const Eigen::VectorXd p_s = log_p_s.array().exp().matrix();

  LossGrad out;
  out.loss = -p_t.dot(log_p_s);
  out.grad = (p_s - p_t) / cfg.student_temp;
  return out;
}

void check_temps(const DistillConfig& cfg) {
  if (cfg.teacher_temp <= 0.0 || cfg.student_temp <= 0.0) {
    throw ConfigError("softmax temperatures must be positive");
  }
}

} // namespace

void DistillConfig::validate() const {
  if (teacher_temp <= 0.0) throw ConfigError("teacher_temp must be positive");
  if (student_temp <= 0.0) throw ConfigError("student_temp must be positive");
  if (lambda < 0.0) throw ConfigError("lambda must be non-negative");
  if (mask_ratio <= 0.0 || mask_ratio >= 1.0) {
    throw ConfigError("mask_ratio must lie strictly between 0 and 1");
  }
  if (prototype_count < 2) throw ConfigError("prototype_count must be at least 2");
  if (koleo_epsilon <= 0.0) throw ConfigError("koleo_epsilon must be positive");
  if (center_momentum <= 0.0 || center_momentum >= 1.0) {
    throw ConfigError("center_momentum must lie strictly between 0 and 1");
  }
}

PrototypeHead PrototypeHead::random_init(int prototypes, int dim, std::uint64_t seed) {
  if (prototypes < 2 || dim < 1) {
    throw ConfigError("prototype head needs at least 2 prototypes and 1 dim");
  }
  Rng rng(seed);
  PrototypeHead head;
  head.weights.resize(prototypes, dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  for (int k = 0; k < prototypes; ++k) {
    for (int d = 0; d < dim; ++d) head.weights(k, d) = scale * rng.normal();
  }
  head.center = Eigen::VectorXd::Zero(prototypes);
  return head;
}

void PrototypeHead::validate() const {
  if (weights.rows() < 2 || weights.cols() < 1) {
    throw ValidationError("prototype head weights must be K x D with K >= 2");
  }
  if (center.size() != weights.rows()) {
    throw ShapeError("prototype center length does not match prototype count");
  }
  if (!weights.allFinite() || !center.allFinite()) {
    throw ValidationError("prototype head contains non-finite values");
  }
  if (center_momentum < 0.0 || center_momentum > 1.0) {
    throw ValidationError("center momentum must lie in [0, 1]");
  }
}

void DistillBatch::validate(const PrototypeHead& head) const {
  const auto dim = head.weights.cols();
  for (const auto& t : teacher_global) {
    if (t.size() != dim) throw ShapeError("teacher feature dimension mismatch");
  }
  for (const auto& v : student_views) {
    if (v.features.size() != dim) throw ShapeError("student feature dimension mismatch");
    if (v.teacher_index < 0 ||
        static_cast<std::size_t>(v.teacher_index) >= teacher_global.size()) {
      throw ValidationError("student view references a missing teacher feature");
    }
  }
  if (teacher_patches.rows() != student_patch_preds.rows() ||
      teacher_patches.cols() != student_patch_preds.cols()) {
    throw ShapeError("teacher/student patch matrices differ in shape");
  }
  if (teacher_patches.rows() > 0 && teacher_patches.cols() != dim) {
    throw ShapeError("patch feature dimension mismatch");
  }
  if (static_cast<Eigen::Index>(patch_mask.size()) != teacher_patches.rows()) {
    throw ShapeError("patch mask length does not match patch count");
  }
  if (student_batch_embeddings.rows() > 0 && student_batch_embeddings.cols() != dim) {
    throw ShapeError("batch embedding dimension mismatch");
  }
}

LossGrad dino_loss(const PrototypeHead& head, const FeatureVector& teacher,
                   const FeatureVector& student, const DistillConfig& cfg) {
  check_temps(cfg);
  head.validate();
  if (teacher.size() != head.weights.cols() || student.size() != head.weights.cols()) {
    throw ShapeError("feature dimension does not match prototype head");
  }
  return centered_cross_entropy(head, head.logits(teacher), head.logits(student), cfg);
}

PatchLossGrad ibot_loss(const PrototypeHead& head,
                        const Eigen::MatrixXd& teacher_patches,
                        const Eigen::MatrixXd& student_patch_preds,
                        const std::vector<std::uint8_t>& patch_mask,
                        const DistillConfig& cfg) {
  check_temps(cfg);
  head.validate();
  if (teacher_patches.rows() != student_patch_preds.rows() ||
      teacher_patches.cols() != student_patch_preds.cols()) {
    throw ShapeError("teacher/student patch matrices differ in shape");
  }
  if (teacher_patches.cols() != head.weights.cols()) {
    throw ShapeError("patch feature dimension does not match prototype head");
  }
  if (static_cast<Eigen::Index>(patch_mask.size()) != teacher_patches.rows()) {
    throw ShapeError("patch mask length does not match patch count");
  }

  const Eigen::Index masked =
      std::count_if(patch_mask.begin(), patch_mask.end(), [](std::uint8_t m) { return m != 0; });
  if (masked == 0) throw ValidationError("masked patch objective requires at least one masked patch");

  PatchLossGrad out;
  out.grad = Eigen::MatrixXd::Zero(teacher_patches.rows(), head.weights.rows());
  for (Eigen::Index p = 0; p < teacher_patches.rows(); ++p) {
    if (!patch_mask[static_cast<std::size_t>(p)]) continue;
    const LossGrad lg = centered_cross_entropy(
        head, head.logits(teacher_patches.row(p).transpose()),
        head.logits(student_patch_preds.row(p).transpose()), cfg);
    out.loss += lg.loss;
    out.grad.row(p) = lg.grad.transpose();
  }
  out.loss /= static_cast<double>(masked);
  out.grad /= static_cast<double>(masked);
  return out;
}

KoleoResult koleo_loss(const Eigen::MatrixXd& embeddings, double epsilon) {
  const Eigen::Index b = embeddings.rows();
  if (b < 2) throw ValidationError("spread regularizer needs a batch of at least 2");
  if (epsilon <= 0.0) throw ValidationError("spread epsilon must be positive");

  Eigen::MatrixXd unit(b, embeddings.cols());
  Eigen::VectorXd norms(b);
  for (Eigen::Index i = 0; i < b; ++i) {
    norms[i] = embeddings.row(i).norm();
    if (norms[i] < 1e-300) throw DegeneracyError("zero-norm embedding in spread regularizer");
    unit.row(i) = embeddings.row(i) / norms[i];
  }

  std::vector<Eigen::Index> nn(b);
  Eigen::VectorXd nn_dist(b);
  for (Eigen::Index i = 0; i < b; ++i) {
    double best = std::numeric_limits<double>::infinity();
    Eigen::Index best_j = -1;
    for (Eigen::Index j = 0; j < b; ++j) {
      if (j == i) continue;
      const double d = (unit.row(i) - unit.row(j)).norm();
      if (d < best) {
        best = d;
        best_j = j;
      }
    }
    nn[i] = best_j;
    nn_dist[i] = best;
  }

  KoleoResult out;
  Eigen::MatrixXd grad_unit = Eigen::MatrixXd::Zero(b, embeddings.cols());
  for (Eigen::Index i = 0; i < b; ++i) {
    out.loss += -std::log(nn_dist[i] + epsilon);
    if (nn_dist[i] <= 0.0) continue; // coincident pair: direction undefined
    const Eigen::RowVectorXd diff = unit.row(i) - unit.row(nn[i]);
    const Eigen::RowVectorXd g = diff / (nn_dist[i] * (nn_dist[i] + epsilon));
    grad_unit.row(i) -= g;     // d(-log)/d x_i
    grad_unit.row(nn[i]) += g; // and through the neighbor
  }
  out.loss /= static_cast<double>(b);
  grad_unit /= static_cast<double>(b);

  // Chain through L2 normalization: J = (I - u u^T) / |x|, symmetric.
  out.grad.resize(b, embeddings.cols());
  for (Eigen::Index i = 0; i < b; ++i) {
    const Eigen::RowVectorXd u = unit.row(i);
    const Eigen::RowVectorXd g = grad_unit.row(i);
    out.grad.row(i) = (g - g.dot(u) * u) / norms[i];
  }
  return out;
}

TotalLossResult total_loss(const DistillBatch& batch, const PrototypeHead& head,
                           const DistillConfig& cfg) {
  cfg.validate();
  head.validate();
  batch.validate(head);
  if (batch.student_views.empty()) {
    throw ValidationError("distillation batch has no student views");
  }

  TotalLossResult out;
  const double view_count = static_cast<double>(batch.student_views.size());
  out.view_logit_grads.reserve(batch.student_views.size());
  bool has_global = false;
  for (const auto& view : batch.student_views) {
    if (!view.is_local_crop) has_global = true;
    const LossGrad lg =
        dino_loss(head, batch.teacher_global[static_cast<std::size_t>(view.teacher_index)],
                  view.features, cfg);
    out.dino += lg.loss / view_count;
    out.view_logit_grads.push_back(lg.grad / view_count);
  }

  // Patch and spread terms apply only when some student view sees the full
  // image; local-crop-only batches get the cross-entropy term alone.
  out.patch_logit_grads =
      Eigen::MatrixXd::Zero(batch.teacher_patches.rows(), head.weights.rows());
  out.embedding_grads = Eigen::MatrixXd::Zero(batch.student_batch_embeddings.rows(),
                                              batch.student_batch_embeddings.cols());
  if (has_global && batch.teacher_patches.rows() > 0) {
    const PatchLossGrad pg = ibot_loss(head, batch.teacher_patches,
                                       batch.student_patch_preds, batch.patch_mask, cfg);
    out.ibot = pg.loss;
    out.patch_logit_grads = pg.grad;
  }
  if (has_global && cfg.lambda > 0.0 && batch.student_batch_embeddings.rows() > 0) {
    const KoleoResult kr = koleo_loss(batch.student_batch_embeddings, cfg.koleo_epsilon);
    out.koleo = kr.loss;
    out.embedding_grads = cfg.lambda * kr.grad;
  }

  out.total = out.dino + out.ibot + cfg.lambda * out.koleo;
  return out;
}

void update_center(PrototypeHead& head, const Eigen::MatrixXd& teacher_logit_batch) {
  head.validate();
  if (teacher_logit_batch.rows() < 1) {
    throw ValidationError("center update requires a nonempty logit batch");
  }
  if (teacher_logit_batch.cols() != head.weights.rows()) {
    throw ShapeError("teacher logit batch width does not match prototype count");
  }
  const Eigen::VectorXd mean = teacher_logit_batch.colwise().mean().transpose();
  head.center = head.center_momentum * head.center + (1.0 - head.center_momentum) * mean;
}

CropRect roint_crop(int image_width, int image_height, int center_x, int center_y,
                    double scale_lo, double scale_hi, std::uint64_t seed) {
  if (image_width < 1 || image_height < 1) {
    throw ValidationError("crop target image must be non-empty");
  }
  if (center_x < 0 || center_x >= image_width || center_y < 0 || center_y >= image_height) {
    throw ValidationError("interaction center lies outside the image");
  }
  if (!(scale_lo > 0.0) || scale_lo > scale_hi || scale_hi > 1.0) {
    throw RangeError("crop scale range must satisfy 0 < lo <= hi <= 1");
  }

  Rng rng(seed);
  const int short_side = std::min(image_width, image_height);
  const double scale = rng.uniform(scale_lo, scale_hi);
  const int side = std::clamp(static_cast<int>(std::lround(scale * short_side)), 1, short_side);

  CropRect rect;
  rect.size = side;
  rect.x = std::clamp(center_x - side / 2, 0, image_width - side);
  rect.y = std::clamp(center_y - side / 2, 0, image_height - side);
  return rect;
}

std::vector<std::uint8_t> sample_block_mask(int patch_rows, int patch_cols,
                                            double mask_ratio, Rng& rng) {
  if (patch_rows < 1 || patch_cols < 1) {
    throw ValidationError("patch grid must be non-empty");
  }
  if (mask_ratio <= 0.0 || mask_ratio >= 1.0) {
    throw RangeError("mask ratio must lie strictly between 0 and 1");
  }

  const int total = patch_rows * patch_cols;
  const int target = std::max(1, static_cast<int>(std::llround(mask_ratio * total)));
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(total), 0);
  int masked = 0;
  int stalled = 0;
  while (masked < target && stalled < 64) {
    int bh = static_cast<int>(rng.uniform_int(1, patch_rows));
    int bw = static_cast<int>(rng.uniform_int(1, patch_cols));
    // Shrink oversized blocks toward the remaining budget.
    while (bh * bw > target && bh * bw > 1) {
      if (bh >= bw && bh > 1) {
        --bh;
      } else if (bw > 1) {
        --bw;
      } else {
        break;
      }
    }
    const int r0 = static_cast<int>(rng.uniform_int(0, patch_rows - bh));
    const int c0 = static_cast<int>(rng.uniform_int(0, patch_cols - bw));
    int added = 0;
    for (int r = r0; r < r0 + bh; ++r) {
      for (int c = c0; c < c0 + bw; ++c) {
        auto& cell = mask[static_cast<std::size_t>(r * patch_cols + c)];
        if (!cell) {
          cell = 1;
          ++added;
        }
      }
    }
    masked += added;
    stalled = added == 0 ? stalled + 1 : 0;
  }
  // Degenerate luck: top up deterministically so the contract always holds.
  for (int i = 0; masked < target && i < total; ++i) {
    if (!mask[static_cast<std::size_t>(i)]) {
      mask[static_cast<std::size_t>(i)] = 1;
      ++masked;
    }
  }
  return mask;
}

} // namespace embridge
