#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "raceplan/error.hpp"
#include "raceplan/harness.hpp"
#include "raceplan/track.hpp"

int main(int argc, char** argv) {
  CLI::App app{"2D racing planning stack: raceline optimization, BC path-tracking, "
               "PPO obstacle nudging"};
  app.require_subcommand(1);

  std::string config_path, checkpoint, centerline, waypoints_out, assets_dir, merged_out;
  std::vector<std::string> run_dirs;
  long seed_override = -1;
  int episodes_override = -1;

  CLI::App* cmd_run = app.add_subcommand("run", "run an experiment config");
  cmd_run->add_option("config", config_path, "experiment config file")->required();
  cmd_run->add_option("--seed", seed_override, "override the config seed");

  CLI::App* cmd_eval = app.add_subcommand("eval", "evaluate a checkpoint");
  cmd_eval->add_option("config", config_path, "experiment config file")->required();
  cmd_eval->add_option("--checkpoint", checkpoint, "policy checkpoint")->required();
  cmd_eval->add_option("--episodes", episodes_override, "number of evaluation episodes");
  cmd_eval->add_option("--seed", seed_override, "override the config seed");

  CLI::App* cmd_raceline = app.add_subcommand("raceline", "optimize a minimum-curvature line");
  cmd_raceline->add_option("centerline", centerline, "centerline CSV")->required();
  cmd_raceline->add_option("-o,--output", waypoints_out, "output waypoint CSV")->required();

  CLI::App* cmd_compare = app.add_subcommand("compare", "merge and summarize run curves");
  cmd_compare->add_option("dirs", run_dirs, "run directories")->required();
  cmd_compare->add_option("-o,--output", merged_out, "merged curve CSV path");

  CLI::App* cmd_assets = app.add_subcommand("gen-assets", "write the bundled tracks");
  cmd_assets->add_option("outdir", assets_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_run->parsed()) {
      raceplan::ExperimentConfig cfg = raceplan::load_experiment_config(config_path);
      if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
      return raceplan::run_experiment(cfg);
    }
    if (cmd_eval->parsed()) {
      raceplan::ExperimentConfig cfg = raceplan::load_experiment_config(config_path);
      cfg.mode = "eval";
      cfg.checkpoint_path = checkpoint;
      if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
      if (episodes_override > 0) cfg.eval_episodes = episodes_override;
      return raceplan::run_experiment(cfg);
    }
    if (cmd_raceline->parsed()) {
      const raceplan::TrackCenterline track = raceplan::load_centerline(centerline);
      const raceplan::MinCurvatureResult result = raceplan::optimize_min_curvature(track);
      raceplan::save_waypoints(result.raceline, waypoints_out);
      std::printf("raceline: objective %.6g (centerline %.6g), %d iterations\n",
                  result.objective, result.initial_objective, result.iterations);
      return 0;
    }
    if (cmd_compare->parsed()) {
      if (merged_out.empty()) merged_out = "compare_merged.csv";
      const auto summary = raceplan::compare_runs(run_dirs, merged_out);
      std::printf("%-40s %16s %18s\n", "run", "final_ma_return", "steps_to_90pct");
      for (const auto& row : summary) {
        std::printf("%-40s %16.2f %18ld\n", row.directory.c_str(), row.final_moving_average,
                    row.steps_to_threshold);
      }
      return 0;
    }
    if (cmd_assets->parsed()) {
      raceplan::generate_assets(assets_dir);
      std::printf("assets written to %s\n", assets_dir.c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
