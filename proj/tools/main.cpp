// Command-line front end: dataset synthesis (run-sim), the odometry pipeline
// (run-odom), and metric assembly (run-eval).

#include <cstdio>
#include <exception>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>

#include "stlio/config.hpp"
#include "stlio/dataset_io.hpp"
#include "stlio/errors.hpp"
#include "stlio/pipeline.hpp"
#include "stlio/simulator.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitDegenerate = 4;

struct SimArgs {
  std::string preset;
  std::string scene_path;
  std::string out_dir;
  std::string dump_scene_path;
  std::uint64_t seed = 0;
  double duration = 0.0;
  bool list_presets = false;
};

int run_sim(const SimArgs& args, const CLI::App& cmd) {
  if (args.list_presets) {
    for (const auto& name : stlio::preset_names()) std::printf("%s\n", name.c_str());
    return kExitOk;
  }
  stlio::SimConfig config;
  if (!args.scene_path.empty()) {
    config = stlio::load_sim_config(args.scene_path);
  } else if (!args.preset.empty()) {
    config = stlio::make_preset(args.preset);
  } else {
    throw stlio::ConfigError("run-sim needs --preset or --scene");
  }
  if (cmd.count("--seed") > 0) config.seed = args.seed;
  if (cmd.count("--duration") > 0) config.duration = args.duration;
  if (!args.dump_scene_path.empty()) {
    std::FILE* f = std::fopen(args.dump_scene_path.c_str(), "wb");
    if (f == nullptr)
      throw stlio::ConfigError("cannot write scene file: " + args.dump_scene_path);
    const std::string text = stlio::sim_config_to_json(config);
    std::fwrite(text.data(), 1, text.size(), f);
    std::fclose(f);
    if (args.out_dir.empty()) return kExitOk;  // dump-only invocation
  }
  if (args.out_dir.empty()) throw stlio::ConfigError("run-sim needs --out");

  const stlio::SimDataset data = stlio::generate_sequence(config);
  stlio::write_dataset(args.out_dir, data);
  std::size_t n_points = 0;
  for (const auto& frame : data.frames) n_points += frame.points.size();
  std::printf("wrote %zu frames (%zu points), %zu imu samples to %s\n",
              data.frames.size(), n_points, data.imu.size(), args.out_dir.c_str());
  return kExitOk;
}

struct OdomArgs {
  std::string dataset_dir;
  std::string out_dir;
  std::string config_path;
  std::string mode;
};

int run_odom(const OdomArgs& args, const stlio::PipelineConfig& flag_values,
             const std::vector<const CLI::Option*>& flag_options, const CLI::App& cmd) {
  stlio::PipelineConfig config;
  if (!args.config_path.empty()) config = stlio::load_pipeline_config(args.config_path);
  // Flags override the config file, which overrides the library defaults.
  const auto& fields = stlio::config_fields();
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (flag_options[i]->count() == 0) continue;
    std::visit([&](auto member) { config.*member = flag_values.*member; }, fields[i].ptr);
  }
  if (cmd.count("--mode") > 0) config.mode = args.mode;
  stlio::validate(config);

  const stlio::Dataset dataset = stlio::open_dataset(args.dataset_dir);
  const stlio::OdometryStats stats = stlio::run_odometry(dataset, config, args.out_dir);
  std::printf("frames=%d registered=%d degenerate=%d mean_total_ms=%.3f\n", stats.frames,
              stats.registered, stats.degenerate, stats.mean_total_ms);
  if (stats.registered > 0 && stats.degenerate == stats.registered) {
    std::fprintf(stderr, "error: every registered frame fell back to the prior\n");
    return kExitDegenerate;
  }
  return kExitOk;
}

int run_eval(const stlio::EvalOptions& options) {
  const std::string metrics = stlio::run_evaluation(options);
  std::printf("%s\n", metrics.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spatio-temporal lidar-inertial odometry toolkit"};
  app.require_subcommand(1);

  SimArgs sim_args;
  CLI::App* sim = app.add_subcommand("run-sim", "synthesize a dataset from a scene");
  sim->add_option("--preset", sim_args.preset, "built-in scenario name");
  sim->add_option("--scene", sim_args.scene_path, "scene/sensor JSON file");
  sim->add_option("--out", sim_args.out_dir, "output dataset directory");
  sim->add_option("--seed", sim_args.seed, "RNG seed override");
  sim->add_option("--duration", sim_args.duration, "sequence length override, s");
  sim->add_option("--dump-scene", sim_args.dump_scene_path,
                  "write the effective scene JSON to this path");
  sim->add_flag("--list-presets", sim_args.list_presets, "print preset names and exit");

  OdomArgs odom_args;
  stlio::PipelineConfig flag_values;
  std::vector<const CLI::Option*> flag_options;
  CLI::App* odom = app.add_subcommand("run-odom", "run the odometry pipeline");
  odom->add_option("--dataset", odom_args.dataset_dir, "dataset directory")->required();
  odom->add_option("--out", odom_args.out_dir, "output directory")->required();
  odom->add_option("--config", odom_args.config_path, "pipeline config JSON");
  odom->add_option("--mode", odom_args.mode, "full | sequential | no-dynamic");
  for (const auto& field : stlio::config_fields()) {
    const std::string flag = std::string("--") + field.group + "." + field.key;
    const CLI::Option* opt = std::visit(
        [&](auto member) -> const CLI::Option* {
          return odom->add_option(flag, flag_values.*member);
        },
        field.ptr);
    flag_options.push_back(opt);
  }

  stlio::EvalOptions eval_options;
  CLI::App* eval = app.add_subcommand("run-eval", "compute trajectory/map/timing metrics");
  eval->add_option("--est", eval_options.estimate_trajectory, "estimated TUM trajectory")
      ->required();
  eval->add_option("--gt", eval_options.truth_trajectory, "ground-truth TUM trajectory")
      ->required();
  eval->add_option("--pred-map", eval_options.predicted_map, "labeled map to score");
  eval->add_option("--dataset", eval_options.dataset_dir, "dataset dir with truth labels");
  eval->add_option("--diagnostics", eval_options.diagnostics, "diagnostics.jsonl for timing");
  eval->add_option("--skip-frames", eval_options.skip_frames,
                   "exclude this many leading frames from map scoring");
  eval->add_option("--out", eval_options.out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (sim->parsed()) return run_sim(sim_args, *sim);
    if (odom->parsed()) return run_odom(odom_args, flag_values, flag_options, *odom);
    return run_eval(eval_options);
  } catch (const stlio::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const stlio::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
