#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "raceplan/geometry.hpp"
#include "raceplan/policy.hpp"
#include "raceplan/track.hpp"
#include "raceplan/vehicle_sim.hpp"

namespace raceplan {

enum class Frame { kWorld, kVehicle };

// H points ahead of the vehicle, uniformly spaced along the raceline arc.
struct HorizonTrajectory {
  std::vector<Point2D> points;
  Frame frame = Frame::kWorld;
};

// Lateral offsets, one per horizon point, applied along the vehicle-frame y
// direction. The policy's action.
struct OffsetVector {
  std::vector<double> o;
};

struct PlanningConfig {
  int horizon = 10;             // H
  double prediction_time = 1.0; // T, seconds
  double o_max = 1.0;           // offset clamp, m
};

// Horizon trajectory plus the reference speeds sampled at the same points
// (the speeds feed the MPC reference).
struct HorizonSample {
  HorizonTrajectory trajectory;
  std::vector<double> speeds;
  std::size_t closest_index = 0;
};

// Walks the raceline from the closest waypoint at the reference speeds for
// the prediction time, then samples H points evenly over the covered arc.
HorizonTrajectory extract_horizon(const Raceline& raceline, const VehicleState& state,
                                  const PlanningConfig& cfg);
HorizonSample extract_horizon_sample(const Raceline& raceline, const VehicleState& state,
                                     const PlanningConfig& cfg);

// t_m = T_c^w(T_w^c t_h + o): lateral offsets added in the vehicle frame.
HorizonTrajectory apply_offsets(const HorizonTrajectory& t_h, const VehicleState& state,
                                const OffsetVector& o);

// Policy input: [scan / range_max | vehicle-frame horizon x,y interleaved | v].
struct Observation {
  std::vector<double> scan;
  std::vector<double> local_horizon;
  double speed = 0.0;

  Eigen::VectorXd flatten() const;
  static int dimension(int beam_count, int horizon) { return beam_count + 2 * horizon + 1; }
};

Observation build_observation(const PolarScan& scan, const HorizonTrajectory& t_h,
                              const VehicleState& state, const LidarConfig& lidar);

// One planning query: tanh-squashed actor mean scaled to +-o_max, or a seeded
// sample from the actor's Gaussian before squashing.
OffsetVector plan_step(const ActorCritic& policy, const Observation& obs,
                       const PlanningConfig& cfg, bool deterministic, Rng& rng);

}  // namespace raceplan
