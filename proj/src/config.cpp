#include "embridge/config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

#include "embridge/errors.hpp"

namespace embridge {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& section,
                std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* k) {
      return item.key() == k;
    });
    if (!known) {
      throw ConfigError("unknown config key '" + (section.empty() ? item.key() : section + "." + item.key()) + "'");
    }
  }
}

template <typename T>
void maybe(const json& obj, const char* key, T& target) {
  if (!obj.contains(key)) return;
  try {
    target = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

RigidTransform pose_from_json(const json& arr, const std::string& context) {
  if (!arr.is_array() || arr.size() != 7) {
    throw ConfigError(context + ": pose must be 7 numbers (qw qx qy qz tx ty tz)");
  }
  Eigen::Quaterniond q(arr[0].get<double>(), arr[1].get<double>(), arr[2].get<double>(),
                       arr[3].get<double>());
  if (q.norm() < 1e-12) throw ConfigError(context + ": zero quaternion");
  return RigidTransform(q, {arr[4].get<double>(), arr[5].get<double>(), arr[6].get<double>()});
}

json pose_to_json(const RigidTransform& t) {
  return json::array({t.rotation.w(), t.rotation.x(), t.rotation.y(), t.rotation.z(),
                      t.translation.x(), t.translation.y(), t.translation.z()});
}

} // namespace

void ToolConfig::validate() const {
  camera.validate();
  if (filter_margin < 0.0) throw ConfigError("filter.margin must be non-negative");
  gripper.validate();
  train.validate();
  synth.validate();
  if (stage2_sequences < 1 || stage2_frames < 1 || holdout_sequences < 1 || holdout_frames < 1) {
    throw ConfigError("run section sequence/frame counts must be at least 1");
  }
}

ToolConfig default_config() { return {}; }

ToolConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config root must be an object");
  check_keys(doc, "", {"camera", "filter", "robot_base", "gripper", "distill", "encoder",
                       "train", "synth", "run"});

  ToolConfig cfg;
  if (doc.contains("camera")) {
    const json& c = doc["camera"];
    check_keys(c, "camera", {"fx", "fy", "cx", "cy", "width", "height", "depth_scale"});
    maybe(c, "fx", cfg.camera.fx);
    maybe(c, "fy", cfg.camera.fy);
    maybe(c, "cx", cfg.camera.cx);
    maybe(c, "cy", cfg.camera.cy);
    maybe(c, "width", cfg.camera.width);
    maybe(c, "height", cfg.camera.height);
    maybe(c, "depth_scale", cfg.camera.depth_scale);
  }
  if (doc.contains("filter")) {
    check_keys(doc["filter"], "filter", {"margin"});
    maybe(doc["filter"], "margin", cfg.filter_margin);
  }
  if (doc.contains("robot_base")) {
    check_keys(doc["robot_base"], "robot_base", {"pose"});
    if (doc["robot_base"].contains("pose")) {
      cfg.robot_base = pose_from_json(doc["robot_base"]["pose"], "robot_base");
    }
  }
  if (doc.contains("gripper")) {
    const json& g = doc["gripper"];
    check_keys(g, "gripper",
               {"max_open", "finger_length", "pad_width", "pad_rows", "pad_cols",
                "plate_rows", "plate_cols", "anchor_depth", "marker_color",
                "swap_fingertips"});
    maybe(g, "max_open", cfg.gripper.max_open);
    maybe(g, "finger_length", cfg.gripper.finger_length);
    maybe(g, "pad_width", cfg.gripper.pad_width);
    maybe(g, "pad_rows", cfg.gripper.pad_rows);
    maybe(g, "pad_cols", cfg.gripper.pad_cols);
    maybe(g, "plate_rows", cfg.gripper.plate_rows);
    maybe(g, "plate_cols", cfg.gripper.plate_cols);
    maybe(g, "anchor_depth", cfg.gripper.anchor_depth);
    maybe(g, "swap_fingertips", cfg.swap_fingertips);
    if (g.contains("marker_color")) {
      const json& m = g["marker_color"];
      if (!m.is_array() || m.size() != 3) {
        throw ConfigError("gripper.marker_color must be an [r, g, b] array");
      }
      cfg.gripper.marker_color =
          Eigen::Vector3d(m[0].get<double>(), m[1].get<double>(), m[2].get<double>());
    }
  }
  if (doc.contains("distill")) {
    const json& d = doc["distill"];
    check_keys(d, "distill", {"lambda", "teacher_temp", "student_temp", "prototype_count",
                              "mask_ratio", "koleo_epsilon", "center_momentum"});
    maybe(d, "lambda", cfg.train.distill.lambda);
    maybe(d, "teacher_temp", cfg.train.distill.teacher_temp);
    maybe(d, "student_temp", cfg.train.distill.student_temp);
    maybe(d, "prototype_count", cfg.train.distill.prototype_count);
    maybe(d, "mask_ratio", cfg.train.distill.mask_ratio);
    maybe(d, "koleo_epsilon", cfg.train.distill.koleo_epsilon);
    maybe(d, "center_momentum", cfg.train.distill.center_momentum);
  }
  if (doc.contains("encoder")) {
    const json& e = doc["encoder"];
    check_keys(e, "encoder", {"image_size", "patch_size", "hidden_dim", "feature_dim"});
    maybe(e, "image_size", cfg.train.encoder.image_size);
    maybe(e, "patch_size", cfg.train.encoder.patch_size);
    maybe(e, "hidden_dim", cfg.train.encoder.hidden_dim);
    maybe(e, "feature_dim", cfg.train.encoder.feature_dim);
  }
  if (doc.contains("train")) {
    const json& t = doc["train"];
    check_keys(t, "train",
               {"steps_stage1", "steps_stage2", "learning_rate", "batch_pairs",
                "local_crops", "roint_prob_stage1", "roint_prob_stage2", "crop_scale_lo",
                "crop_scale_hi", "trunk_lr_scale", "seed"});
    maybe(t, "steps_stage1", cfg.train.steps_stage1);
    maybe(t, "steps_stage2", cfg.train.steps_stage2);
    maybe(t, "learning_rate", cfg.train.learning_rate);
    maybe(t, "batch_pairs", cfg.train.batch_pairs);
    maybe(t, "local_crops", cfg.train.local_crops);
    maybe(t, "roint_prob_stage1", cfg.train.roint_prob_stage1);
    maybe(t, "roint_prob_stage2", cfg.train.roint_prob_stage2);
    maybe(t, "crop_scale_lo", cfg.train.crop_scale_lo);
    maybe(t, "crop_scale_hi", cfg.train.crop_scale_hi);
    maybe(t, "trunk_lr_scale", cfg.train.trunk_lr_scale);
    maybe(t, "seed", cfg.train.seed);
  }
  if (doc.contains("synth")) {
    const json& s = doc["synth"];
    check_keys(s, "synth", {"image_size", "n_sequences", "frames_per_seq",
                            "photometric_shift", "free_motion_fraction", "seed"});
    maybe(s, "image_size", cfg.synth.image_size);
    maybe(s, "n_sequences", cfg.synth.n_sequences);
    maybe(s, "frames_per_seq", cfg.synth.frames_per_seq);
    maybe(s, "photometric_shift", cfg.synth.photometric_shift);
    maybe(s, "free_motion_fraction", cfg.synth.free_motion_fraction);
    maybe(s, "seed", cfg.synth.seed);
  }
  if (doc.contains("run")) {
    const json& r = doc["run"];
    check_keys(r, "run",
               {"stage2_sequences", "stage2_frames", "holdout_sequences", "holdout_frames"});
    maybe(r, "stage2_sequences", cfg.stage2_sequences);
    maybe(r, "stage2_frames", cfg.stage2_frames);
    maybe(r, "holdout_sequences", cfg.holdout_sequences);
    maybe(r, "holdout_frames", cfg.holdout_frames);
  }

  cfg.validate();
  return cfg;
}

ToolConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string config_to_json(const ToolConfig& cfg) {
  json doc;
  doc["camera"] = {{"fx", cfg.camera.fx},        {"fy", cfg.camera.fy},
                   {"cx", cfg.camera.cx},        {"cy", cfg.camera.cy},
                   {"width", cfg.camera.width},  {"height", cfg.camera.height},
                   {"depth_scale", cfg.camera.depth_scale}};
  doc["filter"] = {{"margin", cfg.filter_margin}};
  doc["robot_base"] = {{"pose", pose_to_json(cfg.robot_base)}};
  doc["gripper"] = {{"max_open", cfg.gripper.max_open},
                    {"finger_length", cfg.gripper.finger_length},
                    {"pad_width", cfg.gripper.pad_width},
                    {"pad_rows", cfg.gripper.pad_rows},
                    {"pad_cols", cfg.gripper.pad_cols},
                    {"plate_rows", cfg.gripper.plate_rows},
                    {"plate_cols", cfg.gripper.plate_cols},
                    {"anchor_depth", cfg.gripper.anchor_depth},
                    {"marker_color",
                     json::array({cfg.gripper.marker_color.x(), cfg.gripper.marker_color.y(),
                                  cfg.gripper.marker_color.z()})},
                    {"swap_fingertips", cfg.swap_fingertips}};
  doc["distill"] = {{"lambda", cfg.train.distill.lambda},
                    {"teacher_temp", cfg.train.distill.teacher_temp},
                    {"student_temp", cfg.train.distill.student_temp},
                    {"prototype_count", cfg.train.distill.prototype_count},
                    {"mask_ratio", cfg.train.distill.mask_ratio},
                    {"koleo_epsilon", cfg.train.distill.koleo_epsilon},
                    {"center_momentum", cfg.train.distill.center_momentum}};
  doc["encoder"] = {{"image_size", cfg.train.encoder.image_size},
                    {"patch_size", cfg.train.encoder.patch_size},
                    {"hidden_dim", cfg.train.encoder.hidden_dim},
                    {"feature_dim", cfg.train.encoder.feature_dim}};
  doc["train"] = {{"steps_stage1", cfg.train.steps_stage1},
                  {"steps_stage2", cfg.train.steps_stage2},
                  {"learning_rate", cfg.train.learning_rate},
                  {"batch_pairs", cfg.train.batch_pairs},
                  {"local_crops", cfg.train.local_crops},
                  {"roint_prob_stage1", cfg.train.roint_prob_stage1},
                  {"roint_prob_stage2", cfg.train.roint_prob_stage2},
                  {"crop_scale_lo", cfg.train.crop_scale_lo},
                  {"crop_scale_hi", cfg.train.crop_scale_hi},
                  {"trunk_lr_scale", cfg.train.trunk_lr_scale},
                  {"seed", cfg.train.seed}};
  doc["synth"] = {{"image_size", cfg.synth.image_size},
                  {"n_sequences", cfg.synth.n_sequences},
                  {"frames_per_seq", cfg.synth.frames_per_seq},
                  {"photometric_shift", cfg.synth.photometric_shift},
                  {"free_motion_fraction", cfg.synth.free_motion_fraction},
                  {"seed", cfg.synth.seed}};
  doc["run"] = {{"stage2_sequences", cfg.stage2_sequences},
                {"stage2_frames", cfg.stage2_frames},
                {"holdout_sequences", cfg.holdout_sequences},
                {"holdout_frames", cfg.holdout_frames}};
  return doc.dump(2) + "\n";
}

} // namespace embridge
