#include "embridge/train.hpp"

#include <fstream>
#include <sstream>

#include "embridge/image_ops.hpp"
#include "embridge/text_format.hpp"

namespace embridge {

void TrainConfig::validate() const {
  distill.validate();
  encoder.validate();
  if (steps_stage1 < 0 || steps_stage2 < 0) throw ConfigError("step counts must be non-negative");
  if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
  if (batch_pairs < 2) throw ConfigError("batch_pairs must be at least 2");
  if (local_crops < 0) throw ConfigError("local_crops must be non-negative");
  if (roint_prob_stage1 < 0.0 || roint_prob_stage1 > 1.0 || roint_prob_stage2 < 0.0 ||
      roint_prob_stage2 > 1.0) {
    throw ConfigError("roint probabilities must lie in [0, 1]");
  }
  if (!(crop_scale_lo > 0.0) || crop_scale_lo > crop_scale_hi || crop_scale_hi > 1.0) {
    throw ConfigError("crop scale range must satisfy 0 < lo <= hi <= 1");
  }
  if (trunk_lr_scale < 0.0 || trunk_lr_scale > 1.0) {
    throw ConfigError("trunk_lr_scale must lie in [0, 1]");
  }
}

void write_trace_csv(const std::filesystem::path& path, const TrainTrace& trace) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "step,dino,ibot,koleo,total\n";
  for (const auto& row : trace.rows) {
    out << row.step << ',' << format_double(row.dino) << ',' << format_double(row.ibot)
        << ',' << format_double(row.koleo) << ',' << format_double(row.total) << '\n';
  }
}

TrainTrace read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  TrainTrace trace;
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty trace file " + path.string());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    TraceRow row;
    std::istringstream ss(line);
    char comma;
    if (!(ss >> row.step >> comma >> row.dino >> comma >> row.ibot >> comma >> row.koleo >>
          comma >> row.total)) {
      throw IoError("malformed trace row: " + line);
    }
    trace.rows.push_back(row);
  }
  return trace;
}

LocalCropDraw sample_local_crop(int image_size, int stage, double roint_prob,
                                int interaction_x, int interaction_y,
                                double scale_lo, double scale_hi, Rng& rng) {
  LocalCropDraw draw;
  draw.roint = rng.uniform() < roint_prob;
  (void)stage;
  if (draw.roint) {
    draw.aimed_x = interaction_x;
    draw.aimed_y = interaction_y;
  } else {
    draw.aimed_x = static_cast<int>(rng.uniform_int(0, image_size - 1));
    draw.aimed_y = static_cast<int>(rng.uniform_int(0, image_size - 1));
  }
  draw.rect = roint_crop(image_size, image_size, draw.aimed_x, draw.aimed_y, scale_lo,
                         scale_hi, rng.next_u64());
  return draw;
}

namespace {

struct ViewRecord {
  ForwardCache cache;
  int frame_slot = 0; // index into the batch, not the dataset
  bool is_full = false;
};

} // namespace

TrainTrace distill_stage(const ToyEncoder& teacher, ToyEncoder& student,
                         const PairedFrameSet& pairs, const TrainConfig& cfg,
                         int stage, int steps, std::uint64_t seed) {
  cfg.validate();
  if (stage != 1 && stage != 2) throw ConfigError("stage must be 1 or 2");
  if (pairs.frames.empty()) throw ValidationError("cannot distill from an empty pair set");
  pairs.validate();
  if (!(teacher.dims == student.dims)) {
    throw ShapeError("teacher and student encoder dimensions differ");
  }
  if (pairs.image_size != teacher.dims.image_size) {
    throw ShapeError("pair set image size does not match the encoders");
  }

  const int size = teacher.dims.image_size;
  const int patch_side = teacher.dims.patches_per_side();
  const int patches = teacher.dims.patch_count();
  const int dim = teacher.dims.feature_dim;
  const double roint_prob = stage == 1 ? cfg.roint_prob_stage1 : cfg.roint_prob_stage2;

  PrototypeHead head =
      PrototypeHead::random_init(cfg.distill.prototype_count, dim, Rng::derive(seed, 0));
  head.center_momentum = cfg.distill.center_momentum;

  TrainTrace trace;
  trace.seed = seed;
  trace.rows.reserve(static_cast<std::size_t>(steps));

  EncoderGradients grads;
  for (int step = 0; step < steps; ++step) {
    Rng rng(Rng::derive(seed, 1000 + static_cast<std::uint64_t>(step)));

    DistillBatch batch;
    std::vector<ViewRecord> records;
    batch.teacher_patches.resize(cfg.batch_pairs * patches, dim);
    batch.student_patch_preds.resize(cfg.batch_pairs * patches, dim);
    batch.patch_mask.clear();
    batch.student_batch_embeddings.resize(cfg.batch_pairs, dim);
    Eigen::MatrixXd teacher_logits(cfg.batch_pairs, head.weights.rows());

    for (int b = 0; b < cfg.batch_pairs; ++b) {
      const auto& frame = pairs.frames[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(pairs.frames.size()) - 1))];
      const GrayImage& teacher_img = stage == 1 ? frame.hand : frame.pseudo;
      const GrayImage& student_img = stage == 1 ? frame.pseudo : frame.robot;

      const EncoderOutput t_out = teacher.forward(teacher_img);
      batch.teacher_global.push_back(t_out.global);
      batch.teacher_patches.middleRows(b * patches, patches) = t_out.patch_features;
      teacher_logits.row(b) = head.logits(t_out.global).transpose();

      ViewRecord full;
      full.frame_slot = b;
      full.is_full = true;
      const EncoderOutput s_out = student.forward(student_img, full.cache);
      batch.student_patch_preds.middleRows(b * patches, patches) = s_out.patch_features;
      batch.student_batch_embeddings.row(b) = s_out.global.transpose();
      batch.student_views.push_back({s_out.global, false, b});
      records.push_back(std::move(full));

      const auto mask =
          sample_block_mask(patch_side, patch_side, cfg.distill.mask_ratio, rng);
      batch.patch_mask.insert(batch.patch_mask.end(), mask.begin(), mask.end());

      for (int c = 0; c < cfg.local_crops; ++c) {
        const LocalCropDraw draw =
            sample_local_crop(size, stage, roint_prob, frame.center_x, frame.center_y,
                              cfg.crop_scale_lo, cfg.crop_scale_hi, rng);
        const GrayImage view = resize_bilinear(crop_image(student_img, draw.rect), size, size);
        ViewRecord local;
        local.frame_slot = b;
        const EncoderOutput l_out = student.forward(view, local.cache);
        batch.student_views.push_back({l_out.global, true, b});
        records.push_back(std::move(local));
      }
    }

    const TotalLossResult result = total_loss(batch, head, cfg.distill);

    grads.set_zero(student.dims);
    const Eigen::MatrixXd empty_patches(0, dim);
    // The head consumes L2-normalized features, so logit gradients chain
    // through J = (I - u u^T) / |f| before reaching the encoder.
    const auto chain_normalization = [](const Eigen::VectorXd& raw,
                                        const Eigen::VectorXd& g) -> Eigen::VectorXd {
      const double n = std::max(raw.norm(), 1e-12);
      const Eigen::VectorXd u = raw / n;
      return (g - u.dot(g) * u) / n;
    };
    for (std::size_t v = 0; v < records.size(); ++v) {
      const ViewRecord& rec = records[v];
      Eigen::VectorXd grad_global =
          chain_normalization(batch.student_views[v].features,
                              head.weights.transpose() * result.view_logit_grads[v]);
      if (rec.is_full) {
        grad_global += result.embedding_grads.row(rec.frame_slot).transpose();
        Eigen::MatrixXd grad_patches(patches, dim);
        for (int p = 0; p < patches; ++p) {
          const int row = rec.frame_slot * patches + p;
          grad_patches.row(p) =
              chain_normalization(
                  batch.student_patch_preds.row(row).transpose(),
                  head.weights.transpose() * result.patch_logit_grads.row(row).transpose())
                  .transpose();
        }
        student.backward(rec.cache, grad_global, grad_patches, grads);
      } else {
        student.backward(rec.cache, grad_global, empty_patches, grads);
      }
    }
    grads.w1 *= cfg.trunk_lr_scale;
    grads.b1 *= cfg.trunk_lr_scale;
    student.apply_gradients(grads, cfg.learning_rate);
    update_center(head, teacher_logits);

    trace.rows.push_back({step, result.dino, result.ibot, result.koleo, result.total});
  }
  return trace;
}

TransitiveResult run_transitive(const PairedFrameSet& pairs_stage1,
                                const PairedFrameSet& pairs_stage2,
                                const TrainConfig& cfg) {
  cfg.validate();
  if (pairs_stage1.frames.empty() || pairs_stage2.frames.empty()) {
    throw ValidationError("both stage pair sets must be non-empty");
  }

  TransitiveResult out;
  out.e_h = ToyEncoder::random_init(cfg.encoder, Rng::derive(cfg.seed, 1));
  out.e_h.provenance = "teacher-init";

  out.e_p = out.e_h; // stage-1 student starts from the teacher weights
  out.e_p.provenance = "stage1-student";
  out.trace1 = distill_stage(out.e_h, out.e_p, pairs_stage1, cfg, 1, cfg.steps_stage1,
                             Rng::derive(cfg.seed, 2));

  out.e_r = out.e_p; // stage-2 student starts from the stage-1 result
  out.e_r.provenance = "stage2-student";
  out.trace2 = distill_stage(out.e_p, out.e_r, pairs_stage2, cfg, 2, cfg.steps_stage2,
                             Rng::derive(cfg.seed, 3));
  return out;
}

} // namespace embridge
