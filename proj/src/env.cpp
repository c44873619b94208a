#include "raceplan/env.hpp"

#include <algorithm>
#include <cmath>

#include "raceplan/csv.hpp"
#include "raceplan/error.hpp"

namespace raceplan {

EnvCore::EnvCore(EnvConfig config, std::uint64_t seed)
    : config_(std::move(config)), rng_(seed) {
  validate_raceline(config_.raceline);
  if (config_.control_dt <= 0.0 || config_.physics_dt <= 0.0) {
    throw ValidationError("env: control_dt and physics_dt must be positive");
  }
  substeps_ = static_cast<int>(std::lround(config_.control_dt / config_.physics_dt));
  if (substeps_ < 1 ||
      std::abs(substeps_ * config_.physics_dt - config_.control_dt) > 1e-9) {
    throw ValidationError("env: control_dt must be an integer multiple of physics_dt");
  }
  // The MPC consumes the H modified-trajectory points directly, one per
  // planner time step.
  config_.mpc.horizon = config_.planning.horizon - 1;
  config_.mpc.dt = config_.planning.prediction_time / config_.planning.horizon;
  reset();
}

void EnvCore::sense() {
  scan_ = raycast(config_.grid, sim_.state.pose(), config_.lidar.beam_count, config_.lidar.fov,
                  config_.lidar.range_max);
  horizon_ = extract_horizon_sample(config_.raceline, sim_.state, config_.planning);
  obs_ = build_observation(scan_, horizon_.trajectory, sim_.state, config_.lidar);
}

const Observation& EnvCore::reset() {
  const std::size_t n = config_.raceline.size();
  bool placed = false;
  for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
    const std::size_t idx = static_cast<std::size_t>(rng_.uniform_index(n));
    const Waypoint& w = config_.raceline.waypoints[idx];
    sim_.state = VehicleState{w.x, w.y, 0.0, w.theta};
    sim_.steer = 0.0;
    placed = !check_collision(config_.grid, sim_.state, config_.vehicle);
  }
  if (!placed) {
    throw ValidationError(
        "env: no collision-free start pose found along the waypoints (100 attempts)");
  }
  progress_anchor_ = project_progress(config_.raceline, sim_.state.position());
  progress_total_ = 0.0;
  steps_ = 0;
  mpc_warm_.reset();
  sense();
  return obs_;
}

StepOutcome EnvCore::step(const OffsetVector& offsets) {
  const HorizonTrajectory modified = apply_offsets(horizon_.trajectory, sim_.state, offsets);

  Action action;
  if (config_.controller == ControllerKind::kPurePursuit) {
    action = pure_pursuit_control(sim_.state, modified.points, config_.pure_pursuit,
                                  config_.vehicle);
  } else {
    const auto reference =
        build_mpc_reference(modified.points, horizon_.speeds, config_.vehicle, config_.mpc);
    Eigen::VectorXd warm_out;
    const MpcSolution sol = solve_mpc(sim_.state, reference, config_.mpc, config_.vehicle,
                                      mpc_warm_, &warm_out);
    mpc_warm_ = warm_out;
    const double accel = sol.inputs[0][0];
    action.delta_des = sol.inputs[0][1];
    // Invert the first-order speed lag so the commanded acceleration is
    // realized (subject to the a_max clamp inside the integrator).
    action.v_des =
        std::clamp(sim_.state.v + accel * kSpeedLagTau, 0.0, config_.vehicle.v_max);
  }

  StepOutcome outcome;
  int survived = 0;
  for (int k = 0; k < substeps_; ++k) {
    sim_ = step_dynamics(sim_, action, config_.vehicle, config_.physics_dt);
    ++survived;
    if (check_collision(config_.grid, sim_.state, config_.vehicle)) {
      outcome.collided = true;
      break;
    }
  }

  const double here = project_progress(config_.raceline, sim_.state.position());
  const double perimeter = config_.raceline.perimeter();
  double delta = here - progress_anchor_;
  if (config_.raceline.closed) {
    // Map to the shorter signed arc so seam crossings unwrap correctly.
    delta = std::remainder(delta, perimeter);
  }
  progress_anchor_ = here;
  progress_total_ += delta;
  if (!outcome.collided && progress_total_ >= perimeter) outcome.lap_completed = true;

  outcome.reward = compute_reward(survived, offsets.o, outcome.collided, config_.reward);
  ++steps_;
  outcome.truncated =
      !outcome.collided && !outcome.lap_completed && steps_ >= config_.max_episode_steps;
  outcome.state = sim_.state;
  outcome.steer = sim_.steer;

  const auto [near_idx, near_dist] = closest_waypoint(config_.raceline, sim_.state.position());
  (void)near_idx;
  outcome.cross_track_error = near_dist;

  sense();
  outcome.scan = scan_;
  return outcome;
}

OffsetSource zero_offset_source(int horizon) {
  return [horizon](const Observation&) {
    OffsetVector o;
    o.o.assign(static_cast<std::size_t>(horizon), 0.0);
    return o;
  };
}

OffsetSource policy_offset_source(const ActorCritic& policy, const PlanningConfig& cfg,
                                  bool deterministic, Rng& rng) {
  return [&policy, cfg, deterministic, &rng](const Observation& obs) {
    return plan_step(policy, obs, cfg, deterministic, rng);
  };
}

EpisodeResult run_episode(EnvCore& env, const OffsetSource& offsets, int max_steps) {
  EpisodeResult result;
  env.reset();
  for (int step = 0; step < max_steps; ++step) {
    const OffsetVector o = offsets(env.observation());
    for (double oi : o.o) result.max_abs_offset = std::max(result.max_abs_offset, std::abs(oi));
    const StepOutcome out = env.step(o);

    EpisodeRow row;
    row.t = (step + 1) * env.config().control_dt;
    row.x = out.state.x;
    row.y = out.state.y;
    row.v = out.state.v;
    row.theta = out.state.theta;
    row.delta = out.steer;
    row.reward = out.reward;
    row.collided = out.collided;
    result.log.push_back(row);

    result.episodic_return += out.reward;
    result.max_cross_track_error =
        std::max(result.max_cross_track_error, out.cross_track_error);
    result.steps = step + 1;
    if (out.collided || out.lap_completed) {
      result.collided = out.collided;
      result.lap_completed = out.lap_completed;
      break;
    }
  }
  return result;
}

void write_episode_csv(const EpisodeResult& episode, const std::string& path) {
  csv::Table table;
  table.header = {"t", "x", "y", "v", "theta", "delta", "reward", "collided"};
  for (const EpisodeRow& r : episode.log) {
    table.rows.push_back(
        {r.t, r.x, r.y, r.v, r.theta, r.delta, r.reward, r.collided ? 1.0 : 0.0});
  }
  csv::write(path, table);
}

}  // namespace raceplan
