#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "embridge/pipeline.hpp"

namespace {

embridge::ToolConfig load_or_default(const std::string& config_path,
                                     const std::optional<std::uint64_t>& seed) {
  embridge::ToolConfig cfg = config_path.empty()
                                 ? embridge::default_config()
                                 : embridge::load_config(config_path);
  if (seed) {
    cfg.train.seed = *seed;
    cfg.synth.seed = *seed;
  }
  return cfg;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Converts human and robot demonstrations into shared hybrid "
               "observations and runs the two-stage encoder distillation"};
  app.require_subcommand(1);

  std::string config_path;
  std::string input_dir, output_dir, urdf_path, occupancy_path;
  std::string encoder_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> margin;
  int jobs = 1;
  bool print_defaults = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file (defaults apply when absent)");
    cmd->add_option("--seed", seed, "Override the training and synthesis seeds");
  };

  CLI::App* align_human = app.add_subcommand(
      "align-human", "Filter hand pixels out of RGB-D frames and insert the fitted gripper");
  add_common(align_human);
  align_human->add_option("--input", input_dir, "Directory with frames.jsonl + images")
      ->required();
  align_human->add_option("--output", output_dir, "Output directory")->required();
  align_human->add_option("--jobs", jobs, "Worker threads for frame conversion");

  CLI::App* align_robot = app.add_subcommand(
      "align-robot", "Filter robot geometry out of RGB-D frames and insert the gripper "
                     "at the proprioceptive pose");
  add_common(align_robot);
  align_robot->add_option("--input", input_dir, "Directory with frames.jsonl + images")
      ->required();
  align_robot->add_option("--urdf", urdf_path, "Robot description file")->required();
  align_robot->add_option("--occupancy", occupancy_path, "Per-link collision primitives JSON")
      ->required();
  align_robot->add_option("--output", output_dir, "Output directory")->required();
  align_robot->add_option("--margin", margin, "Removal margin in meters (overrides config)");
  align_robot->add_option("--jobs", jobs, "Worker threads for frame conversion");

  CLI::App* distill = app.add_subcommand(
      "distill", "Run the two-stage frozen-teacher distillation on synthetic pairs");
  add_common(distill);
  distill->add_option("--output", output_dir, "Output directory")->required();

  CLI::App* analyze = app.add_subcommand(
      "analyze", "Compute similarity curves and feature projections for trained encoders");
  analyze->add_option("--encoders", encoder_dir, "Directory with e_h.enc/e_p.enc/e_r.enc")
      ->required();
  analyze->add_option("--input", input_dir, "Paired dataset directory")->required();
  analyze->add_option("--output", output_dir, "Output directory")->required();

  CLI::App* synth = app.add_subcommand(
      "synth-data", "Render a paired hand/gripper synthetic dataset");
  add_common(synth);
  synth->add_option("--output", output_dir, "Output directory")->required();

  CLI::App* config_cmd = app.add_subcommand("config", "Inspect tool configuration");
  config_cmd->add_flag("--print-defaults", print_defaults, "Print the built-in defaults");
  config_cmd->add_option("--config", config_path, "Validate and echo this config file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (align_human->parsed()) {
      const auto cfg = load_or_default(config_path, seed);
      return embridge::cmd_align_human(input_dir, output_dir, cfg, config_path, jobs,
                                       std::clog)
          .exit_code;
    }
    if (align_robot->parsed()) {
      const auto cfg = load_or_default(config_path, seed);
      return embridge::cmd_align_robot(input_dir, urdf_path, occupancy_path, output_dir,
                                       cfg, config_path, margin, jobs, std::clog)
          .exit_code;
    }
    if (distill->parsed()) {
      const auto cfg = load_or_default(config_path, seed);
      return embridge::cmd_distill(cfg, config_path, output_dir, std::clog).exit_code;
    }
    if (analyze->parsed()) {
      return embridge::cmd_analyze(encoder_dir, input_dir, output_dir, std::clog).exit_code;
    }
    if (synth->parsed()) {
      const auto cfg = load_or_default(config_path, seed);
      return embridge::cmd_synth_data(cfg, config_path, output_dir, std::clog).exit_code;
    }
    if (config_cmd->parsed()) {
      if (print_defaults) {
        std::cout << embridge::config_to_json(embridge::default_config());
      } else if (!config_path.empty()) {
        std::cout << embridge::config_to_json(embridge::load_config(config_path));
      } else {
        std::cerr << "error: pass --print-defaults or --config PATH\n";
        return 2;
      }
      return 0;
    }
  } catch (const embridge::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
