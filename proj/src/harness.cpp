#include "raceplan/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "raceplan/csv.hpp"
#include "raceplan/error.hpp"

namespace raceplan {

namespace fs = std::filesystem;

namespace {

struct ConfigEntry {
  std::string section;
  std::string key;
  std::string value;
  int line = 0;
};

std::vector<ConfigEntry> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config: " + path);
  std::vector<ConfigEntry> entries;
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    // trim
    const auto begin = line.find_first_not_of(" \t");
    if (begin == std::string::npos) continue;
    const auto end = line.find_last_not_of(" \t");
    line = line.substr(begin, end - begin + 1);
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(path + ":" + std::to_string(line_no) +
                                               ": malformed section header");
      section = line.substr(1, line.size() - 2);
      continue;
    }
    const std::size_t colon = line.find(':');
    if (colon == std::string::npos) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected 'key: value'");
    }
    ConfigEntry e;
    e.section = section;
    e.key = line.substr(0, colon);
    while (!e.key.empty() && (e.key.back() == ' ' || e.key.back() == '\t')) e.key.pop_back();
    std::string value = line.substr(colon + 1);
    const auto vb = value.find_first_not_of(" \t");
    e.value = vb == std::string::npos ? "" : value.substr(vb);
    e.line = line_no;
    entries.push_back(std::move(e));
  }
  return entries;
}

double to_double(const ConfigEntry& e, const std::string& path) {
  double v = 0.0;
  const char* b = e.value.data();
  auto [p, ec] = std::from_chars(b, b + e.value.size(), v);
  if (ec != std::errc{} || p != b + e.value.size()) {
    throw ParseError(path + ":" + std::to_string(e.line) + ": field '" + e.key +
                     "' expects a number, got '" + e.value + "'");
  }
  return v;
}

long to_long(const ConfigEntry& e, const std::string& path) {
  return static_cast<long>(to_double(e, path));
}

std::vector<double> to_doubles(const ConfigEntry& e, const std::string& path) {
  std::istringstream ss(e.value);
  std::vector<double> out;
  std::string tok;
  while (ss >> tok) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || p != tok.data() + tok.size()) {
      throw ParseError(path + ":" + std::to_string(e.line) + ": field '" + e.key +
                       "' expects numbers, got '" + tok + "'");
    }
    out.push_back(v);
  }
  return out;
}

std::string resolve_path(const std::string& base_dir, const std::string& p) {
  if (p.empty()) return p;
  fs::path path(p);
  if (path.is_absolute()) return p;
  return (fs::path(base_dir) / path).lexically_normal().string();
}

void assign_vec(Eigen::Vector4d& target, const std::vector<double>& v, const ConfigEntry& e,
                const std::string& path) {
  if (v.size() != 4) {
    throw ParseError(path + ":" + std::to_string(e.line) + ": '" + e.key +
                     "' expects 4 numbers");
  }
  for (int i = 0; i < 4; ++i) target[i] = v[static_cast<std::size_t>(i)];
}

void assign_vec(Eigen::Vector2d& target, const std::vector<double>& v, const ConfigEntry& e,
                const std::string& path) {
  if (v.size() != 2) {
    throw ParseError(path + ":" + std::to_string(e.line) + ": '" + e.key +
                     "' expects 2 numbers");
  }
  target[0] = v[0];
  target[1] = v[1];
}

}  // namespace

ExperimentConfig load_experiment_config(const std::string& path) {
  const auto entries = parse_config_file(path);
  const std::string base = fs::path(path).parent_path().string();
  ExperimentConfig cfg;

  for (const ConfigEntry& e : entries) {
    const std::string& s = e.section;
    const std::string& k = e.key;
    if (s.empty()) {
      if (k == "mode") cfg.mode = e.value;
      else if (k == "map") cfg.map_path = resolve_path(base, e.value);
      else if (k == "waypoints") cfg.waypoint_path = resolve_path(base, e.value);
      else if (k == "centerline") cfg.centerline_path = resolve_path(base, e.value);
      else if (k == "raceline_out") cfg.raceline_out = resolve_path(base, e.value);
      else if (k == "controller") cfg.controller = e.value;
      else if (k == "checkpoint") cfg.checkpoint_path = resolve_path(base, e.value);
      else if (k == "output_dir") cfg.output_dir = e.value;  // resolved at run time
      else if (k == "seed") cfg.seed = static_cast<std::uint64_t>(to_long(e, path));
      else if (k == "eval_episodes") cfg.eval_episodes = static_cast<int>(to_long(e, path));
      else if (k == "checkpoint_interval") cfg.checkpoint_interval = to_long(e, path);
      else if (k == "max_episode_steps") cfg.max_episode_steps = static_cast<int>(to_long(e, path));
      else throw ParseError(path + ":" + std::to_string(e.line) + ": unknown key '" + k + "'");
    } else if (s == "planning") {
      if (k == "horizon") cfg.planning.horizon = static_cast<int>(to_long(e, path));
      else if (k == "prediction_time") cfg.planning.prediction_time = to_double(e, path);
      else if (k == "o_max") cfg.planning.o_max = to_double(e, path);
      else throw ParseError(path + ":" + std::to_string(e.line) + ": unknown planning key");
    } else if (s == "train") {
      if (k == "learning_rate") cfg.train.learning_rate = to_double(e, path);
      else if (k == "gamma") cfg.train.gamma = to_double(e, path);
      else if (k == "gae_lambda") cfg.train.gae_lambda = to_double(e, path);
      else if (k == "clip_eps") cfg.train.clip_eps = to_double(e, path);
      else if (k == "max_grad_norm") cfg.train.max_grad_norm = to_double(e, path);
      else if (k == "update_epochs") cfg.train.update_epochs = static_cast<int>(to_long(e, path));
      else if (k == "minibatch_size") cfg.train.minibatch_size = static_cast<int>(to_long(e, path));
      else if (k == "total_timesteps") cfg.train.total_timesteps = to_long(e, path);
      else if (k == "num_envs") cfg.train.num_envs = static_cast<int>(to_long(e, path));
      else if (k == "rollout_steps") cfg.train.rollout_steps = static_cast<int>(to_long(e, path));
      else if (k == "ent_coef") cfg.train.ent_coef = to_double(e, path);
      else if (k == "vf_coef") cfg.train.vf_coef = to_double(e, path);
      else throw ParseError(path + ":" + std::to_string(e.line) + ": unknown train key");
    } else if (s == "vehicle") {
      if (k == "wheelbase") cfg.vehicle.wheelbase = to_double(e, path);
      else if (k == "delta_max") cfg.vehicle.delta_max = to_double(e, path);
      else if (k == "v_max") cfg.vehicle.v_max = to_double(e, path);
      else if (k == "a_max") cfg.vehicle.a_max = to_double(e, path);
      else if (k == "steer_rate_max") cfg.vehicle.steer_rate_max = to_double(e, path);
      else if (k == "body_length") cfg.vehicle.body_length = to_double(e, path);
      else if (k == "body_width") cfg.vehicle.body_width = to_double(e, path);
      else throw ParseError(path + ":" + std::to_string(e.line) + ": unknown vehicle key");
    } else if (s == "lidar") {
      if (k == "beam_count") cfg.lidar.beam_count = static_cast<int>(to_long(e, path));
      else if (k == "fov") cfg.lidar.fov = to_double(e, path);
      else if (k == "range_max") cfg.lidar.range_max = to_double(e, path);
      else throw ParseError(path + ":" + std::to_string(e.line) + ": unknown lidar key");
    } else if (s == "reward") {
      if (k == "step_coeff") cfg.reward.step_coeff = to_double(e, path);
      else if (k == "collision_penalty") cfg.reward.collision_penalty = to_double(e, path);
      else throw ParseError(path + ":" + std::to_string(e.line) + ": unknown reward key");
    } else if (s == "pure_pursuit") {
      if (k == "lookahead") cfg.pure_pursuit.lookahead = to_double(e, path);
      else if (k == "speed") cfg.pure_pursuit.speed = to_double(e, path);
      else throw ParseError(path + ":" + std::to_string(e.line) + ": unknown pure_pursuit key");
    } else if (s == "mpc") {
      if (k == "q_step") assign_vec(cfg.mpc.q_step, to_doubles(e, path), e, path);
      else if (k == "q_final") assign_vec(cfg.mpc.q_final, to_doubles(e, path), e, path);
      else if (k == "r_step") assign_vec(cfg.mpc.r_step, to_doubles(e, path), e, path);
      else if (k == "r_diff") assign_vec(cfg.mpc.r_diff, to_doubles(e, path), e, path);
      else if (k == "z_min") assign_vec(cfg.mpc.z_min, to_doubles(e, path), e, path);
      else if (k == "z_max") assign_vec(cfg.mpc.z_max, to_doubles(e, path), e, path);
      else if (k == "u_min") assign_vec(cfg.mpc.u_min, to_doubles(e, path), e, path);
      else if (k == "u_max") assign_vec(cfg.mpc.u_max, to_doubles(e, path), e, path);
      else if (k == "du_min") assign_vec(cfg.mpc.du_min, to_doubles(e, path), e, path);
      else if (k == "du_max") assign_vec(cfg.mpc.du_max, to_doubles(e, path), e, path);
      else throw ParseError(path + ":" + std::to_string(e.line) + ": unknown mpc key");
    } else if (s == "obstacles") {
      if (k == "obstacle") {
        const auto v = to_doubles(e, path);
        if (v.size() != 3) {
          throw ParseError(path + ":" + std::to_string(e.line) +
                           ": obstacle expects 'index shift size'");
        }
        cfg.obstacles.push_back(
            {static_cast<std::size_t>(v[0]), v[1], v[2]});
      } else {
        throw ParseError(path + ":" + std::to_string(e.line) + ": unknown obstacles key");
      }
    } else {
      throw ParseError(path + ":" + std::to_string(e.line) + ": unknown section '" + s + "'");
    }
  }
  return cfg;
}

void save_experiment_config(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write config: " + path);
  const auto d = [&](double v) { return csv::format_double(v); };
  out << "mode: " << cfg.mode << "\n";
  if (!cfg.map_path.empty()) out << "map: " << cfg.map_path << "\n";
  if (!cfg.waypoint_path.empty()) out << "waypoints: " << cfg.waypoint_path << "\n";
  if (!cfg.centerline_path.empty()) out << "centerline: " << cfg.centerline_path << "\n";
  if (!cfg.raceline_out.empty()) out << "raceline_out: " << cfg.raceline_out << "\n";
  out << "controller: " << cfg.controller << "\n";
  if (!cfg.checkpoint_path.empty()) out << "checkpoint: " << cfg.checkpoint_path << "\n";
  if (!cfg.output_dir.empty()) out << "output_dir: " << cfg.output_dir << "\n";
  out << "seed: " << cfg.seed << "\n";
  out << "eval_episodes: " << cfg.eval_episodes << "\n";
  out << "checkpoint_interval: " << cfg.checkpoint_interval << "\n";
  out << "max_episode_steps: " << cfg.max_episode_steps << "\n";
  out << "\n[planning]\n";
  out << "horizon: " << cfg.planning.horizon << "\n";
  out << "prediction_time: " << d(cfg.planning.prediction_time) << "\n";
  out << "o_max: " << d(cfg.planning.o_max) << "\n";
  out << "\n[train]\n";
  out << "learning_rate: " << d(cfg.train.learning_rate) << "\n";
  out << "gamma: " << d(cfg.train.gamma) << "\n";
  out << "gae_lambda: " << d(cfg.train.gae_lambda) << "\n";
  out << "clip_eps: " << d(cfg.train.clip_eps) << "\n";
  out << "max_grad_norm: " << d(cfg.train.max_grad_norm) << "\n";
  out << "update_epochs: " << cfg.train.update_epochs << "\n";
  out << "minibatch_size: " << cfg.train.minibatch_size << "\n";
  out << "total_timesteps: " << cfg.train.total_timesteps << "\n";
  out << "num_envs: " << cfg.train.num_envs << "\n";
  out << "rollout_steps: " << cfg.train.rollout_steps << "\n";
  out << "ent_coef: " << d(cfg.train.ent_coef) << "\n";
  out << "vf_coef: " << d(cfg.train.vf_coef) << "\n";
  out << "\n[vehicle]\n";
  out << "wheelbase: " << d(cfg.vehicle.wheelbase) << "\n";
  out << "delta_max: " << d(cfg.vehicle.delta_max) << "\n";
  out << "v_max: " << d(cfg.vehicle.v_max) << "\n";
  out << "a_max: " << d(cfg.vehicle.a_max) << "\n";
  out << "steer_rate_max: " << d(cfg.vehicle.steer_rate_max) << "\n";
  out << "body_length: " << d(cfg.vehicle.body_length) << "\n";
  out << "body_width: " << d(cfg.vehicle.body_width) << "\n";
  out << "\n[lidar]\n";
  out << "beam_count: " << cfg.lidar.beam_count << "\n";
  out << "fov: " << d(cfg.lidar.fov) << "\n";
  out << "range_max: " << d(cfg.lidar.range_max) << "\n";
  out << "\n[reward]\n";
  out << "step_coeff: " << d(cfg.reward.step_coeff) << "\n";
  out << "collision_penalty: " << d(cfg.reward.collision_penalty) << "\n";
  out << "\n[pure_pursuit]\n";
  out << "lookahead: " << d(cfg.pure_pursuit.lookahead) << "\n";
  out << "speed: " << d(cfg.pure_pursuit.speed) << "\n";
  out << "\n[mpc]\n";
  const auto vec4 = [&](const char* key, const Eigen::Vector4d& v) {
    out << key << ": " << d(v[0]) << " " << d(v[1]) << " " << d(v[2]) << " " << d(v[3]) << "\n";
  };
  const auto vec2 = [&](const char* key, const Eigen::Vector2d& v) {
    out << key << ": " << d(v[0]) << " " << d(v[1]) << "\n";
  };
  vec4("q_step", cfg.mpc.q_step);
  vec4("q_final", cfg.mpc.q_final);
  vec2("r_step", cfg.mpc.r_step);
  vec2("r_diff", cfg.mpc.r_diff);
  vec4("z_min", cfg.mpc.z_min);
  vec4("z_max", cfg.mpc.z_max);
  vec2("u_min", cfg.mpc.u_min);
  vec2("u_max", cfg.mpc.u_max);
  vec2("du_min", cfg.mpc.du_min);
  vec2("du_max", cfg.mpc.du_max);
  if (!cfg.obstacles.empty()) {
    out << "\n[obstacles]\n";
    for (const ObstacleSpec& ob : cfg.obstacles) {
      out << "obstacle: " << ob.waypoint_index << " " << d(ob.lateral_shift) << " "
          << d(ob.size) << "\n";
    }
  }
}

EnvConfig build_env_config(const ExperimentConfig& cfg) {
  if (cfg.map_path.empty()) throw ValidationError("config: missing field 'map'");
  if (cfg.waypoint_path.empty()) throw ValidationError("config: missing field 'waypoints'");
  if (!fs::exists(cfg.map_path)) throw ValidationError("config: map not found: " + cfg.map_path);
  if (!fs::exists(cfg.waypoint_path)) {
    throw ValidationError("config: waypoints not found: " + cfg.waypoint_path);
  }

  EnvConfig env;
  env.grid = load_occupancy_map(cfg.map_path);
  env.raceline = load_waypoints(cfg.waypoint_path);
  if (!cfg.obstacles.empty()) {
    env.grid = place_obstacles(env.grid, env.raceline, cfg.obstacles);
  }
  env.vehicle = cfg.vehicle;
  env.lidar = cfg.lidar;
  env.planning = cfg.planning;
  env.reward = cfg.reward;
  env.pure_pursuit = cfg.pure_pursuit;
  env.mpc = cfg.mpc;
  env.max_episode_steps = cfg.max_episode_steps;
  if (cfg.controller == "pure-pursuit") {
    env.controller = ControllerKind::kPurePursuit;
  } else if (cfg.controller == "mpc") {
    env.controller = ControllerKind::kMpc;
  } else {
    throw ValidationError("config: controller must be 'pure-pursuit' or 'mpc', got '" +
                          cfg.controller + "'");
  }
  return env;
}

std::string prepare_output_dir(const ExperimentConfig& cfg) {
  if (cfg.output_dir.empty()) throw ValidationError("config: missing field 'output_dir'");
  fs::path dir(cfg.output_dir);
  if (!dir.is_absolute()) {
    if (const char* root = std::getenv("RACEPLAN_OUTPUT_ROOT")) {
      dir = fs::path(root) / dir;
    }
  }
  fs::create_directories(dir);
  return dir.string();
}

namespace {

void write_return_curve(const std::vector<ReturnPoint>& curve, const std::string& path) {
  csv::Table t;
  t.header = {"step", "episodic_return"};
  for (const ReturnPoint& p : curve) {
    t.rows.push_back({static_cast<double>(p.step), p.episodic_return});
  }
  csv::write(path, t);
}

void write_loss_curve(const std::vector<ReturnPoint>& curve, const std::string& path) {
  csv::Table t;
  t.header = {"step", "loss"};
  for (const ReturnPoint& p : curve) {
    t.rows.push_back({static_cast<double>(p.step), p.episodic_return});
  }
  csv::write(path, t);
}

TrainCallback make_checkpoint_hook(const ExperimentConfig& cfg, const std::string& out_dir) {
  if (cfg.checkpoint_interval <= 0) return {};
  auto last = std::make_shared<long>(0);
  const long interval = cfg.checkpoint_interval;
  return [out_dir, interval, last](long step, const ActorCritic& policy) {
    if (step - *last >= interval) {
      *last = step;
      save_checkpoint(policy, out_dir + "/checkpoint_" + std::to_string(step) + ".ckpt");
    }
  };
}

}  // namespace

EvalSummary evaluate_policy(const EnvConfig& env_cfg, const ActorCritic& policy,
                            const PlanningConfig& planning, int episodes, std::uint64_t seed,
                            const std::string& output_dir) {
  EvalSummary summary;
  summary.episodes = episodes;
  std::vector<double> returns;
  Rng unused(0);  // deterministic mode never draws from it

  csv::Table per_episode;
  per_episode.header = {"episode", "return", "steps", "collided", "lap_completed",
                        "max_abs_offset", "max_cross_track_error"};
  for (int ep = 0; ep < episodes; ++ep) {
    EnvCore env(env_cfg, seed + static_cast<std::uint64_t>(ep));
    const auto source = policy_offset_source(policy, planning, /*deterministic=*/true, unused);
    const EpisodeResult result = run_episode(env, source, env_cfg.max_episode_steps);
    returns.push_back(result.episodic_return);
    summary.completion_rate += result.lap_completed ? 1.0 : 0.0;
    summary.max_abs_offset = std::max(summary.max_abs_offset, result.max_abs_offset);
    summary.max_cross_track_error =
        std::max(summary.max_cross_track_error, result.max_cross_track_error);
    if (!output_dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof(name), "episode_%03d.csv", ep);
      write_episode_csv(result, output_dir + "/" + name);
      per_episode.rows.push_back({static_cast<double>(ep), result.episodic_return,
                                  static_cast<double>(result.steps),
                                  result.collided ? 1.0 : 0.0,
                                  result.lap_completed ? 1.0 : 0.0, result.max_abs_offset,
                                  result.max_cross_track_error});
    }
  }
  if (!returns.empty()) {
    double sum = 0.0;
    for (double r : returns) sum += r;
    summary.return_mean = sum / returns.size();
    double sq = 0.0;
    for (double r : returns) sq += (r - summary.return_mean) * (r - summary.return_mean);
    summary.return_std = returns.size() > 1 ? std::sqrt(sq / (returns.size() - 1)) : 0.0;
    summary.completion_rate /= static_cast<double>(returns.size());
  }
  if (!output_dir.empty()) {
    csv::write(output_dir + "/eval_episodes.csv", per_episode);
    csv::Table s;
    s.header = {"episodes", "return_mean", "return_std", "completion_rate", "max_abs_offset",
                "max_cross_track_error"};
    s.rows.push_back({static_cast<double>(summary.episodes), summary.return_mean,
                      summary.return_std, summary.completion_rate, summary.max_abs_offset,
                      summary.max_cross_track_error});
    csv::write(output_dir + "/eval_summary.csv", s);
  }
  return summary;
}

namespace {

void write_training_artifacts(const ExperimentConfig& cfg, const std::string& out_dir,
                              const TrainResult& result) {
  save_experiment_config(cfg, out_dir + "/config.cfg");
  write_return_curve(result.return_curve, out_dir + "/return_curve.csv");
  write_loss_curve(result.loss_curve, out_dir + "/loss_curve.csv");
  save_checkpoint(result.policy, out_dir + "/policy.ckpt");
}

}  // namespace

int run_experiment(const ExperimentConfig& cfg) {
  if (cfg.mode == "bc-train") {
    const std::string out_dir = prepare_output_dir(cfg);
    EnvConfig env = build_env_config(cfg);
    TrainConfig train = cfg.train;
    train.seed = cfg.seed;
    const TrainResult result = bc_train(env, train, make_checkpoint_hook(cfg, out_dir));
    write_training_artifacts(cfg, out_dir, result);
    evaluate_policy(env, result.policy, cfg.planning, cfg.eval_episodes, cfg.seed, out_dir);
    return 0;
  }
  if (cfg.mode == "ppo-train") {
    const std::string out_dir = prepare_output_dir(cfg);
    EnvConfig env = build_env_config(cfg);
    TrainConfig train = cfg.train;
    train.seed = cfg.seed;
    ActorCritic bootstrap;
    const ActorCritic* bootstrap_ptr = nullptr;
    if (!cfg.checkpoint_path.empty()) {
      bootstrap = load_checkpoint(cfg.checkpoint_path);
      bootstrap_ptr = &bootstrap;
    }
    const TrainResult result =
        ppo_train(env, bootstrap_ptr, train, make_checkpoint_hook(cfg, out_dir));
    write_training_artifacts(cfg, out_dir, result);
    evaluate_policy(env, result.policy, cfg.planning, cfg.eval_episodes, cfg.seed, out_dir);
    return 0;
  }
  if (cfg.mode == "eval") {
    if (cfg.checkpoint_path.empty()) {
      throw ValidationError("config: eval mode needs field 'checkpoint'");
    }
    const std::string out_dir = prepare_output_dir(cfg);
    const EnvConfig env = build_env_config(cfg);
    const ActorCritic policy = load_checkpoint(cfg.checkpoint_path);
    save_experiment_config(cfg, out_dir + "/config.cfg");
    const EvalSummary s = evaluate_policy(env, policy, cfg.planning, cfg.eval_episodes,
                                          cfg.seed, out_dir);
    std::printf("eval: episodes=%d return=%.2f +- %.2f completion=%.2f max|o|=%.3f e_max=%.3f\n",
                s.episodes, s.return_mean, s.return_std, s.completion_rate, s.max_abs_offset,
                s.max_cross_track_error);
    return 0;
  }
  if (cfg.mode == "raceline") {
    if (cfg.centerline_path.empty()) {
      throw ValidationError("config: raceline mode needs field 'centerline'");
    }
    if (cfg.raceline_out.empty()) {
      throw ValidationError("config: raceline mode needs field 'raceline_out'");
    }
    const TrackCenterline track = load_centerline(cfg.centerline_path);
    MinCurvatureConfig mc;
    const MinCurvatureResult result = optimize_min_curvature(track, mc);
    save_waypoints(result.raceline, cfg.raceline_out);
    std::printf("raceline: objective %.6g (centerline %.6g), %d iterations\n",
                result.objective, result.initial_objective, result.iterations);
    return 0;
  }
  throw ValidationError("config: unknown mode '" + cfg.mode + "'");
}

std::vector<RunComparison> compare_runs(const std::vector<std::string>& run_dirs,
                                        const std::string& merged_csv_path) {
  if (run_dirs.empty()) throw ValidationError("compare_runs: no run directories given");

  struct Curve {
    std::vector<long> steps;
    std::vector<double> returns;
  };
  std::vector<Curve> curves;
  for (const std::string& dir : run_dirs) {
    const std::string file = dir + "/return_curve.csv";
    if (!fs::exists(file)) {
      throw Error("compare_runs: missing return curve: " + file);
    }
    const csv::Table t = csv::read(file);
    const std::size_t cs = t.column("step");
    const std::size_t cr = t.column("episodic_return");
    Curve c;
    for (const auto& row : t.rows) {
      c.steps.push_back(static_cast<long>(row[cs]));
      c.returns.push_back(row[cr]);
    }
    curves.push_back(std::move(c));
  }

  // Merged table aligned on the union of steps; blank cells where a run has
  // no episode ending at that step.
  std::vector<long> all_steps;
  for (const Curve& c : curves) all_steps.insert(all_steps.end(), c.steps.begin(), c.steps.end());
  std::sort(all_steps.begin(), all_steps.end());
  all_steps.erase(std::unique(all_steps.begin(), all_steps.end()), all_steps.end());

  if (!merged_csv_path.empty()) {
    std::ofstream out(merged_csv_path, std::ios::binary);
    if (!out) throw Error("cannot write merged curve: " + merged_csv_path);
    out << "step";
    for (std::size_t r = 0; r < run_dirs.size(); ++r) out << ";run" << r;
    out << "\n";
    std::vector<std::size_t> cursor(curves.size(), 0);
    for (long step : all_steps) {
      out << step;
      for (std::size_t r = 0; r < curves.size(); ++r) {
        out << ";";
        std::size_t& k = cursor[r];
        if (k < curves[r].steps.size() && curves[r].steps[k] == step) {
          out << csv::format_double(curves[r].returns[k]);
          ++k;
        }
      }
      out << "\n";
    }
  }

  const std::size_t window = 20;
  std::vector<RunComparison> summary;
  for (std::size_t r = 0; r < curves.size(); ++r) {
    RunComparison cmp;
    cmp.directory = run_dirs[r];
    const auto& returns = curves[r].returns;
    if (!returns.empty()) {
      const std::size_t n = std::min(window, returns.size());
      double sum = 0.0;
      for (std::size_t i = returns.size() - n; i < returns.size(); ++i) sum += returns[i];
      cmp.final_moving_average = sum / static_cast<double>(n);
      const double threshold = 0.9 * cmp.final_moving_average;
      double acc = 0.0;
      std::size_t count = 0;
      for (std::size_t i = 0; i < returns.size(); ++i) {
        acc += returns[i];
        if (i >= n) acc -= returns[i - n];
        count = std::min(i + 1, n);
        const double ma = acc / static_cast<double>(count);
        if (i + 1 >= n && ma >= threshold) {
          cmp.steps_to_threshold = curves[r].steps[i];
          break;
        }
      }
    }
    summary.push_back(std::move(cmp));
  }
  return summary;
}

void generate_assets(const std::string& out_dir) {
  fs::create_directories(out_dir);
  MinCurvatureConfig mc;
  mc.boundary_margin = 0.25;
  mc.max_iterations = 40000;  // the bundled tracks have a few hundred points

  {
    const TrackCenterline oval = make_oval_centerline();
    save_centerline(oval, out_dir + "/oval_centerline.csv");
    const MinCurvatureResult result = optimize_min_curvature(oval, mc);
    save_waypoints(result.raceline, out_dir + "/oval_waypoints.csv");
    save_occupancy_map(rasterize_track(oval), out_dir + "/oval_map.pgm");
  }
  {
    const TrackCenterline squiggle = make_squiggle_centerline();
    save_centerline(squiggle, out_dir + "/squiggle_centerline.csv");
    const MinCurvatureResult result = optimize_min_curvature(squiggle, mc);
    save_waypoints(result.raceline, out_dir + "/squiggle_waypoints.csv");
    save_occupancy_map(rasterize_track(squiggle), out_dir + "/squiggle_map.pgm");
  }
}

}  // namespace raceplan
