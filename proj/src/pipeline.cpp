#include "embridge/pipeline.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "embridge/analysis.hpp"
#include "embridge/encoder.hpp"
#include "embridge/filter.hpp"
#include "embridge/image_io.hpp"
#include "embridge/occupancy.hpp"
#include "embridge/ply_io.hpp"
#include "embridge/synth.hpp"
#include "embridge/text_format.hpp"
#include "embridge/train.hpp"

namespace embridge {

namespace {

using nlohmann::json;

Eigen::Vector3d vec3_from(const json& arr, const char* what) {
  if (!arr.is_array() || arr.size() != 3) {
    throw ValidationError(std::string(what) + " must be an array of three numbers");
  }
  return {arr[0].get<double>(), arr[1].get<double>(), arr[2].get<double>()};
}

FrameRecord record_from_json(const json& doc) {
  FrameRecord rec;
  rec.timestamp = doc.value("timestamp", 0.0);
  rec.depth = doc.value("depth", "");
  rec.color = doc.value("color", "");
  rec.mask = doc.value("mask", "");
  if (doc.contains("hand")) {
    const json& h = doc["hand"];
    HandObservation hand;
    hand.timestamp = rec.timestamp;
    hand.thumb_tip = vec3_from(h.at("thumb_tip"), "hand.thumb_tip");
    hand.index_tip = vec3_from(h.at("index_tip"), "hand.index_tip");
    if (h.contains("wrist")) hand.wrist = vec3_from(h["wrist"], "hand.wrist");
    rec.hand = hand;
  }
  if (doc.contains("joints")) {
    JointState q;
    q.timestamp = rec.timestamp;
    for (const auto& item : doc["joints"].items()) {
      q.values[item.key()] = item.value().get<double>();
    }
    rec.joints = q;
  }
  if (doc.contains("gripper")) {
    const json& g = doc["gripper"];
    GripperState state;
    state.timestamp = rec.timestamp;
    const json& pose = g.at("pose");
    if (!pose.is_array() || pose.size() != 7) {
      throw ValidationError("gripper.pose must be 7 numbers (qw qx qy qz tx ty tz)");
    }
    state.pose = RigidTransform(
        Eigen::Quaterniond(pose[0].get<double>(), pose[1].get<double>(),
                           pose[2].get<double>(), pose[3].get<double>()),
        {pose[4].get<double>(), pose[5].get<double>(), pose[6].get<double>()});
    state.opening = g.at("opening").get<double>();
    rec.gripper = state;
  }
  rec.validate();
  return rec;
}

struct FrameOutcome {
  bool converted = false;
  std::string detail;
  std::string csv_row; // empty for failed frames
};

/// Runs `work(i)` for every frame index over `jobs` threads; outcomes land
/// in index order so downstream files never depend on scheduling.
template <typename Fn>
std::vector<FrameOutcome> for_each_frame(std::size_t count, int jobs, Fn&& work) {
  std::vector<FrameOutcome> outcomes(count);
  const int workers = std::max(1, jobs);
  if (workers == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) outcomes[i] = work(i);
    return outcomes;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
        outcomes[i] = work(i);
      }
    });
  }
  for (auto& t : pool) t.join();
  return outcomes;
}

std::string frame_name(int index, const char* domain) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "frame_%06d_%s.ply", index, domain);
  return buf;
}

RunResult finish_run(RunManifest manifest, const std::filesystem::path& output_dir,
                     std::ostream& log) {
  manifest.write(output_dir / "run.json");
  RunResult result;
  const std::size_t failed = manifest.failed_count();
  if (manifest.converted_count() == 0 && !manifest.frames.empty()) {
    log << "error: all " << manifest.frames.size() << " frames failed\n";
    result.exit_code = 2;
  } else if (failed > 0) {
    log << failed << " of " << manifest.frames.size() << " frames failed\n";
    result.exit_code = 1;
  }
  result.manifest = std::move(manifest);
  return result;
}

struct EvalSequence {
  std::vector<GrayImage> hand, pseudo, robot;
};

std::map<int, EvalSequence> group_sequences(const PairedFrameSet& set) {
  std::map<int, EvalSequence> groups;
  for (const auto& f : set.frames) {
    if (f.free_motion) continue;
    auto& g = groups[f.sequence_id];
    g.hand.push_back(f.hand);
    g.pseudo.push_back(f.pseudo);
    g.robot.push_back(f.robot);
  }
  if (groups.empty()) throw ValidationError("dataset holds no interaction sequences");
  return groups;
}

EncoderFn global_feature(const ToyEncoder& enc) {
  return [&enc](const GrayImage& img) { return enc.forward(img).global; };
}

double mean_of(const std::vector<double>& xs) {
  double m = 0.0;
  for (double x : xs) m += x;
  return xs.empty() ? 0.0 : m / static_cast<double>(xs.size());
}

/// Held-out evaluation shared by the distillation run and offline analysis,
/// so both report identical numbers for identical inputs.
struct HoldoutEval {
  SimilarityCurves curves;
  double mean_in_sequence = 0.0;
  double mean_aligned = 0.0;
  double mean_unaligned = 0.0;
  double mean_transitive_aligned = 0.0;   // hand anchor vs robot-view student
  double mean_transitive_unaligned = 0.0; // same gap under the untrained teacher
};

HoldoutEval evaluate_holdout(const ToyEncoder& e_h, const ToyEncoder& e_p,
                             const ToyEncoder& e_r, const PairedFrameSet& holdout) {
  const auto groups = group_sequences(holdout);

  std::vector<ImageSequencePair> pairs;
  for (const auto& [id, seq] : groups) {
    ImageSequencePair p;
    p.id = "seq" + std::to_string(id);
    p.human = seq.hand;
    p.pseudo = seq.pseudo;
    pairs.push_back(std::move(p));
  }

  HoldoutEval eval;
  // The stage-1 teacher is never trained, so it doubles as the untrained
  // baseline for the no-alignment condition.
  eval.curves = three_curve_protocol(pairs, global_feature(e_h), global_feature(e_p),
                                     global_feature(e_h));
  eval.mean_in_sequence = mean_of(eval.curves.in_sequence_mean);
  eval.mean_aligned = mean_of(eval.curves.aligned_mean);
  eval.mean_unaligned = mean_of(eval.curves.unaligned_mean);

  std::vector<double> transitive, transitive_base;
  for (const auto& [id, seq] : groups) {
    const Eigen::VectorXd anchor = e_h.forward(seq.hand.front()).global;
    for (const auto& img : seq.robot) {
      transitive.push_back(cosine_similarity(anchor, e_r.forward(img).global));
      transitive_base.push_back(cosine_similarity(anchor, e_h.forward(img).global));
    }
  }
  eval.mean_transitive_aligned = mean_of(transitive);
  eval.mean_transitive_unaligned = mean_of(transitive_base);
  return eval;
}

void write_summary_csv(const std::filesystem::path& path, const HoldoutEval& eval) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "metric,value\n";
  out << "mean_in_sequence," << format_double(eval.mean_in_sequence) << "\n";
  out << "mean_cross_domain_aligned," << format_double(eval.mean_aligned) << "\n";
  out << "mean_cross_domain_unaligned," << format_double(eval.mean_unaligned) << "\n";
  out << "gap_aligned_to_in_sequence,"
      << format_double(eval.mean_in_sequence - eval.mean_aligned) << "\n";
  out << "gap_unaligned_to_in_sequence,"
      << format_double(eval.mean_in_sequence - eval.mean_unaligned) << "\n";
  out << "mean_transitive_aligned," << format_double(eval.mean_transitive_aligned) << "\n";
  out << "mean_transitive_unaligned," << format_double(eval.mean_transitive_unaligned)
      << "\n";
}

} // namespace

void FrameRecord::validate() const {
  if (depth.empty()) throw ValidationError("frame record is missing its depth path");
  const bool human = human_evidence();
  const bool robot = robot_evidence();
  if (human == robot) {
    if (!mask.empty() || hand || joints || gripper) {
      throw ValidationError(
          "frame must carry exactly one embodiment evidence: mask+hand or joints+gripper");
    }
    throw ValidationError("frame carries no embodiment evidence");
  }
}

std::vector<ParsedFrame> read_frames_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<ParsedFrame> parsed;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ParsedFrame frame;
    try {
      frame.record = record_from_json(json::parse(line));
    } catch (const std::exception& e) {
      frame.error = e.what();
    }
    parsed.push_back(std::move(frame));
  }
  return parsed;
}

std::size_t RunManifest::converted_count() const {
  std::size_t n = 0;
  for (const auto& f : frames) n += f.converted ? 1 : 0;
  return n;
}

std::size_t RunManifest::failed_count() const { return frames.size() - converted_count(); }

void RunManifest::write(const std::filesystem::path& path) const {
  json doc;
  doc["command"] = command;
  doc["config"] = config_path;
  doc["input"] = input_dir;
  doc["output"] = output_dir;
  doc["version"] = version;
  doc["seed"] = seed;
  doc["converted"] = converted_count();
  doc["failed"] = failed_count();
  doc["frames"] = json::array();
  for (const auto& f : frames) {
    doc["frames"].push_back(
        {{"index", f.index}, {"status", f.converted ? "converted" : "failed"},
         {"detail", f.detail}});
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(2) << "\n";
}

RunResult cmd_align_human(const std::filesystem::path& input_dir,
                          const std::filesystem::path& output_dir, const ToolConfig& cfg,
                          const std::string& config_path, int jobs, std::ostream& log) {
  cfg.validate();
  const auto parsed = read_frames_jsonl(input_dir / "frames.jsonl");
  if (parsed.empty()) throw ValidationError("no frames in " + input_dir.string());
  std::filesystem::create_directories(output_dir);

  const auto outcomes = for_each_frame(parsed.size(), jobs, [&](std::size_t i) {
    FrameOutcome out;
    const ParsedFrame& frame = parsed[i];
    try {
      if (!frame.record) throw ValidationError("bad record: " + frame.error);
      const FrameRecord& rec = *frame.record;
      if (!rec.human_evidence()) {
        throw ValidationError(rec.robot_evidence()
                                  ? "robot-evidence frame in a human run"
                                  : "missing mask or hand observation");
      }
      const DepthImage depth = read_png16(input_dir / rec.depth);
      const SegmentationMask mask = read_png8(input_dir / rec.mask);
      RgbImage color;
      const bool with_color = !rec.color.empty();
      if (with_color) color = read_png_rgb(input_dir / rec.color);

      auto [bg, report] = filter_human(depth, cfg.camera, mask, with_color ? &color : nullptr);
      report.margin = cfg.filter_margin;
      const auto [state, residual] =
          fit_gripper_from_fingertips(*rec.hand, cfg.gripper, cfg.swap_fingertips);
      const PointCloud hybrid = assemble_hybrid(bg, state, cfg.gripper);
      write_ply(output_dir / frame_name(static_cast<int>(i), "human"), hybrid);

      std::ostringstream row;
      row << i << ',' << format_double(rec.timestamp) << ',' << report.total << ','
          << report.removed << ',' << report.kept << ',' << format_double(report.margin)
          << ',' << format_double(residual);
      out.csv_row = row.str();
      out.converted = true;
      out.detail = "residual " + format_double(residual);
    } catch (const std::exception& e) {
      out.detail = e.what();
    }
    return out;
  });

  std::ofstream reports(output_dir / "reports.csv");
  if (!reports) throw IoError("cannot write reports.csv");
  reports << "frame,timestamp,total,removed,kept,margin,fit_residual\n";
  for (const auto& o : outcomes) {
    if (o.converted) reports << o.csv_row << "\n";
  }

  RunManifest manifest;
  manifest.command = "align-human";
  manifest.config_path = config_path;
  manifest.input_dir = input_dir.string();
  manifest.output_dir = output_dir.string();
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    manifest.frames.push_back(
        {static_cast<int>(i), outcomes[i].converted, outcomes[i].detail});
    if (!outcomes[i].converted) {
      log << "frame " << i << " failed: " << outcomes[i].detail << "\n";
    }
  }
  return finish_run(std::move(manifest), output_dir, log);
}

RunResult cmd_align_robot(const std::filesystem::path& input_dir,
                          const std::filesystem::path& urdf_path,
                          const std::filesystem::path& occupancy_path,
                          const std::filesystem::path& output_dir, const ToolConfig& cfg,
                          const std::string& config_path, std::optional<double> margin_override,
                          int jobs, std::ostream& log) {
  cfg.validate();
  std::ifstream urdf_file(urdf_path);
  if (!urdf_file) throw IoError("cannot open " + urdf_path.string());
  std::ostringstream urdf_text;
  urdf_text << urdf_file.rdbuf();
  KinematicChain chain = parse_chain(urdf_text.str());
  chain.validate();
  const OccupancyModel occ = load_occupancy(occupancy_path);
  occ.validate(chain);
  const double margin = margin_override.value_or(cfg.filter_margin);
  if (margin < 0.0) throw ConfigError("margin must be non-negative");

  const auto parsed = read_frames_jsonl(input_dir / "frames.jsonl");
  if (parsed.empty()) throw ValidationError("no frames in " + input_dir.string());
  std::filesystem::create_directories(output_dir);

  const auto outcomes = for_each_frame(parsed.size(), jobs, [&](std::size_t i) {
    FrameOutcome out;
    const ParsedFrame& frame = parsed[i];
    try {
      if (!frame.record) throw ValidationError("bad record: " + frame.error);
      const FrameRecord& rec = *frame.record;
      if (!rec.robot_evidence()) {
        throw ValidationError(rec.human_evidence()
                                  ? "human-evidence frame in a robot run"
                                  : "missing joint state or gripper state");
      }
      const DepthImage depth = read_png16(input_dir / rec.depth);
      RgbImage color;
      const bool with_color = !rec.color.empty();
      if (with_color) color = read_png_rgb(input_dir / rec.color);
      const PointCloud cloud =
          unproject(depth, cfg.camera, nullptr, with_color ? &color : nullptr);

      std::string warn_note;
      for (const auto& w : limit_warnings(chain, *rec.joints)) {
        warn_note += warn_note.empty() ? "warning: " + w : "; " + w;
      }

      const auto [bg, report] =
          filter_robot(cloud, chain, occ, *rec.joints, margin, cfg.robot_base);
      const PointCloud hybrid = assemble_hybrid(bg, *rec.gripper, cfg.gripper);
      write_ply(output_dir / frame_name(static_cast<int>(i), "robot"), hybrid);

      std::ostringstream row;
      row << i << ',' << format_double(rec.timestamp) << ',' << report.total << ','
          << report.removed << ',' << report.kept << ',' << format_double(report.margin);
      out.csv_row = row.str();
      out.converted = true;
      out.detail = warn_note.empty() ? "removed " + std::to_string(report.removed) : warn_note;
    } catch (const std::exception& e) {
      out.detail = e.what();
    }
    return out;
  });

  std::ofstream reports(output_dir / "reports.csv");
  if (!reports) throw IoError("cannot write reports.csv");
  reports << "frame,timestamp,total,removed,kept,margin\n";
  for (const auto& o : outcomes) {
    if (o.converted) reports << o.csv_row << "\n";
  }

  RunManifest manifest;
  manifest.command = "align-robot";
  manifest.config_path = config_path;
  manifest.input_dir = input_dir.string();
  manifest.output_dir = output_dir.string();
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    manifest.frames.push_back(
        {static_cast<int>(i), outcomes[i].converted, outcomes[i].detail});
    if (!outcomes[i].converted) {
      log << "frame " << i << " failed: " << outcomes[i].detail << "\n";
    } else if (outcomes[i].detail.rfind("warning:", 0) == 0) {
      log << "frame " << i << " " << outcomes[i].detail << "\n";
    }
  }
  return finish_run(std::move(manifest), output_dir, log);
}

RunResult cmd_distill(const ToolConfig& cfg, const std::string& config_path,
                      const std::filesystem::path& output_dir, std::ostream& log) {
  cfg.validate();
  std::filesystem::create_directories(output_dir);

  SynthConfig stage1_cfg = cfg.synth;
  SynthConfig stage2_cfg = cfg.synth;
  stage2_cfg.n_sequences = cfg.stage2_sequences;
  stage2_cfg.frames_per_seq = cfg.stage2_frames;
  stage2_cfg.free_motion_fraction = 0.0; // paired manipulation only
  stage2_cfg.seed = Rng::derive(cfg.synth.seed, 21);
  SynthConfig holdout_cfg = cfg.synth;
  holdout_cfg.n_sequences = cfg.holdout_sequences;
  holdout_cfg.frames_per_seq = cfg.holdout_frames;
  holdout_cfg.free_motion_fraction = 0.0;
  holdout_cfg.seed = Rng::derive(cfg.synth.seed, 22);

  const PairedFrameSet stage1 = synthesize_pairs(stage1_cfg);
  const PairedFrameSet stage2 = synthesize_pairs(stage2_cfg);
  const PairedFrameSet holdout = synthesize_pairs(holdout_cfg);

  log << "stage 1: " << stage1.frames.size() << " pairs, stage 2: " << stage2.frames.size()
      << " pairs, holdout: " << holdout.frames.size() << " pairs\n";

  const TransitiveResult result = run_transitive(stage1, stage2, cfg.train);

  result.e_h.save(output_dir / "e_h.enc");
  result.e_p.save(output_dir / "e_p.enc");
  result.e_r.save(output_dir / "e_r.enc");
  write_trace_csv(output_dir / "trace_stage1.csv", result.trace1);
  write_trace_csv(output_dir / "trace_stage2.csv", result.trace2);
  write_dataset(output_dir / "holdout", holdout);

  const HoldoutEval eval = evaluate_holdout(result.e_h, result.e_p, result.e_r, holdout);
  write_similarity_csv(output_dir / "similarity.csv", eval.curves);
  write_summary_csv(output_dir / "summary.csv", eval);
  write_plot_description(output_dir / "plot_description.txt");

  std::ofstream cfg_out(output_dir / "config.json");
  if (!cfg_out) throw IoError("cannot write config.json");
  cfg_out << config_to_json(cfg);

  log << "held-out aligned " << format_double(eval.mean_aligned) << " vs unaligned "
      << format_double(eval.mean_unaligned) << "\n";

  RunManifest manifest;
  manifest.command = "distill";
  manifest.config_path = config_path;
  manifest.output_dir = output_dir.string();
  manifest.seed = cfg.train.seed;
  return finish_run(std::move(manifest), output_dir, log);
}

RunResult cmd_analyze(const std::filesystem::path& encoder_dir,
                      const std::filesystem::path& dataset_dir,
                      const std::filesystem::path& output_dir, std::ostream& log) {
  const ToyEncoder e_h = ToyEncoder::load(encoder_dir / "e_h.enc");
  const ToyEncoder e_p = ToyEncoder::load(encoder_dir / "e_p.enc");
  const ToyEncoder e_r = ToyEncoder::load(encoder_dir / "e_r.enc");
  const PairedFrameSet dataset = read_dataset(dataset_dir);
  if (!(e_h.dims == e_p.dims) || !(e_h.dims == e_r.dims)) {
    throw ValidationError("encoder dimensions disagree between e_h/e_p/e_r");
  }
  if (dataset.image_size != e_h.dims.image_size) {
    throw ValidationError("encoder expects " + std::to_string(e_h.dims.image_size) +
                          "px images but the dataset is " +
                          std::to_string(dataset.image_size) + "px");
  }
  std::filesystem::create_directories(output_dir);

  const HoldoutEval eval = evaluate_holdout(e_h, e_p, e_r, dataset);
  write_similarity_csv(output_dir / "similarity.csv", eval.curves);
  write_summary_csv(output_dir / "summary.csv", eval);
  write_plot_description(output_dir / "plot_description.txt");

  // Joint projection of teacher features on human views and the robot-view
  // student's features on robot views.
  std::vector<std::string> labels;
  std::vector<Eigen::VectorXd> rows;
  for (const auto& f : dataset.frames) {
    if (f.free_motion) continue;
    rows.push_back(e_h.forward(f.hand).global);
    labels.push_back("human");
    rows.push_back(e_r.forward(f.robot).global);
    labels.push_back("real");
  }
  Eigen::MatrixXd features(static_cast<Eigen::Index>(rows.size()), e_h.dims.feature_dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    features.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  const PcaResult pca = pca_project(features, 2);
  write_pca_csv(output_dir / "pca.csv", pca, labels);

  log << "curves over " << eval.curves.length() << " frame indices, "
      << labels.size() << " points projected\n";

  RunManifest manifest;
  manifest.command = "analyze";
  manifest.input_dir = dataset_dir.string();
  manifest.output_dir = output_dir.string();
  return finish_run(std::move(manifest), output_dir, log);
}

RunResult cmd_synth_data(const ToolConfig& cfg, const std::string& config_path,
                         const std::filesystem::path& output_dir, std::ostream& log) {
  cfg.validate();
  const PairedFrameSet set = synthesize_pairs(cfg.synth);
  write_dataset(output_dir, set);
  log << "wrote " << set.frames.size() << " paired frames\n";

  RunManifest manifest;
  manifest.command = "synth-data";
  manifest.config_path = config_path;
  manifest.output_dir = output_dir.string();
  manifest.seed = cfg.synth.seed;
  return finish_run(std::move(manifest), output_dir, log);
}

} // namespace embridge
