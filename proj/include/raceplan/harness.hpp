#pragma once

#include <string>
#include <vector>

#include "raceplan/env.hpp"
#include "raceplan/learn.hpp"

namespace raceplan {

// One experiment: mode, assets, controller, planning/training settings,
// obstacles, seed, output location. Loaded from a `key: value` file with
// `[section]` headers; relative paths resolve against the config file.
struct ExperimentConfig {
  std::string mode;  // bc-train | ppo-train | eval | raceline
  std::string map_path;
  std::string waypoint_path;
  std::string centerline_path;   // raceline mode input
  std::string raceline_out;      // raceline mode output
  std::string controller = "pure-pursuit";
  std::string checkpoint_path;   // ppo-train bootstrap / eval policy
  std::string output_dir;
  std::uint64_t seed = 1;
  int eval_episodes = 10;
  long checkpoint_interval = 0;  // steps between checkpoints; 0 = final only
  int max_episode_steps = 2000;

  PlanningConfig planning;
  TrainConfig train;
  VehicleParams vehicle;
  LidarConfig lidar;
  RewardConfig reward;
  PurePursuitConfig pure_pursuit;
  MpcConfig mpc;
  std::vector<ObstacleSpec> obstacles;
};

ExperimentConfig load_experiment_config(const std::string& path);
// Writes the fully resolved config; reloading it reproduces the run.
void save_experiment_config(const ExperimentConfig& cfg, const std::string& path);

// Assembles the closed-loop environment (map + waypoints + obstacles).
EnvConfig build_env_config(const ExperimentConfig& cfg);

// Applies the output-root environment variable and creates the directory.
std::string prepare_output_dir(const ExperimentConfig& cfg);

// Mode dispatch. Writes all artifacts into the output directory and returns
// the process exit status (0 on success).
int run_experiment(const ExperimentConfig& cfg);

struct EvalSummary {
  int episodes = 0;
  double return_mean = 0.0;
  double return_std = 0.0;
  double completion_rate = 0.0;
  double max_abs_offset = 0.0;
  double max_cross_track_error = 0.0;
};

EvalSummary evaluate_policy(const EnvConfig& env_cfg, const ActorCritic& policy,
                            const PlanningConfig& planning, int episodes, std::uint64_t seed,
                            const std::string& output_dir);

struct RunComparison {
  std::string directory;
  double final_moving_average = 0.0;
  long steps_to_threshold = -1;  // first step at 90% of the final average
};

// Merges return curves by step and summarizes each run. Throws Error when a
// directory has no return_curve.csv.
std::vector<RunComparison> compare_runs(const std::vector<std::string>& run_dirs,
                                        const std::string& merged_csv_path);

// Oval and squiggle track bundles (centerline, optimized waypoints, map).
void generate_assets(const std::string& out_dir);

}  // namespace raceplan
