#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

#include "raceplan/controllers.hpp"
#include "raceplan/planner.hpp"
#include "raceplan/policy.hpp"
#include "raceplan/track.hpp"
#include "raceplan/vehicle_sim.hpp"

namespace raceplan {

enum class ControllerKind { kPurePursuit, kMpc };

// Everything one closed-loop episode needs: map, reference line, vehicle,
// sensing, planning, reward shaping, and the executing controller.
struct EnvConfig {
  OccupancyGrid grid;
  Raceline raceline;
  VehicleParams vehicle;
  LidarConfig lidar;
  PlanningConfig planning;
  RewardConfig reward;
  ControllerKind controller = ControllerKind::kPurePursuit;
  PurePursuitConfig pure_pursuit;
  MpcConfig mpc;
  double control_dt = 0.1;   // s, 10 Hz sense-plan-act
  double physics_dt = 0.01;  // s, integrator sub-step
  int max_episode_steps = 2000;  // control steps before truncation
};

// Result of one 10 Hz control step.
struct StepOutcome {
  VehicleState state;
  PolarScan scan;
  bool collided = false;
  bool lap_completed = false;
  double reward = 0.0;
  bool truncated = false;  // step limit hit, episode ends without terminal flag
  double steer = 0.0;      // actual steering angle after the step
  double cross_track_error = 0.0;  // distance to the raceline, for diagnostics

  bool done() const { return collided || lap_completed || truncated; }
};

// One environment instance; owns its state and RNG. Episodes start at a
// random waypoint (matching orientation, collision free).
class EnvCore {
 public:
  EnvCore(EnvConfig config, std::uint64_t seed);

  const Observation& reset();
  // Applies the offsets to the current horizon, runs the controller and the
  // physics sub-steps, returns the outcome. observation() then refers to the
  // post-step (or post-reset) situation.
  StepOutcome step(const OffsetVector& offsets);

  const Observation& observation() const { return obs_; }
  const HorizonSample& horizon() const { return horizon_; }
  const EnvConfig& config() const { return config_; }
  const VehicleState& state() const { return sim_.state; }
  double steer() const { return sim_.steer; }
  int steps() const { return steps_; }
  int substeps_per_step() const { return substeps_; }
  int observation_dim() const {
    return Observation::dimension(config_.lidar.beam_count, config_.planning.horizon);
  }

 private:
  void sense();

  EnvConfig config_;
  Rng rng_;
  SimState sim_;
  Observation obs_;
  PolarScan scan_;
  HorizonSample horizon_;
  double progress_anchor_ = 0.0;  // last projected arc position
  double progress_total_ = 0.0;   // unwrapped arc progress this episode
  int steps_ = 0;
  int substeps_ = 10;
  std::optional<Eigen::VectorXd> mpc_warm_;
};

// One trajectory-log row per executed control step.
struct EpisodeRow {
  double t = 0.0;
  double x = 0.0, y = 0.0, v = 0.0, theta = 0.0, delta = 0.0;
  double reward = 0.0;
  bool collided = false;
};

struct EpisodeResult {
  std::vector<EpisodeRow> log;
  double episodic_return = 0.0;
  bool collided = false;
  bool lap_completed = false;
  int steps = 0;
  double max_abs_offset = 0.0;
  double max_cross_track_error = 0.0;
};

using OffsetSource = std::function<OffsetVector(const Observation&)>;

// Zero offsets: the expert that tracks the raw waypoints.
OffsetSource zero_offset_source(int horizon);
// Policy-driven offsets (deterministic mean or seeded stochastic samples).
OffsetSource policy_offset_source(const ActorCritic& policy, const PlanningConfig& cfg,
                                  bool deterministic, Rng& rng);

// Runs sense-plan-control-integrate until collision, lap completion, or
// max_steps. max_steps = 0 yields an empty log.
EpisodeResult run_episode(EnvCore& env, const OffsetSource& offsets, int max_steps);

void write_episode_csv(const EpisodeResult& episode, const std::string& path);

}  // namespace raceplan
