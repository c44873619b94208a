#include "raceplan/planner.hpp"

#include <cmath>

#include "raceplan/error.hpp"

namespace raceplan {

HorizonSample extract_horizon_sample(const Raceline& raceline, const VehicleState& state,
                                     const PlanningConfig& cfg) {
  if (cfg.horizon < 2) throw ValidationError("extract_horizon: horizon must be >= 2");
  if (cfg.prediction_time <= 0.0) {
    throw ValidationError("extract_horizon: prediction_time must be positive");
  }
  const auto [start_index, start_dist] = closest_waypoint(raceline, state.position());
  (void)start_dist;

  // Arc length covered in T seconds at the reference speeds, stepping H times.
  const double dt = cfg.prediction_time / cfg.horizon;
  double arc = 0.0;
  double speed_here = raceline.waypoints[start_index].v;
  for (int k = 0; k < cfg.horizon; ++k) {
    arc += speed_here * dt;
    if (arc > 0.0) {
      speed_here = resample_waypoints_by_arclength(raceline, start_index, arc, 2).back().v;
    }
  }
  arc = std::max(arc, 1e-3);  // zero-speed references still yield a horizon

  const auto samples =
      resample_waypoints_by_arclength(raceline, start_index, arc, cfg.horizon);
  HorizonSample out;
  out.closest_index = start_index;
  out.trajectory.frame = Frame::kWorld;
  out.trajectory.points.reserve(samples.size());
  out.speeds.reserve(samples.size());
  for (const Waypoint& w : samples) {
    out.trajectory.points.push_back({w.x, w.y});
    out.speeds.push_back(w.v);
  }
  return out;
}

HorizonTrajectory extract_horizon(const Raceline& raceline, const VehicleState& state,
                                  const PlanningConfig& cfg) {
  return extract_horizon_sample(raceline, state, cfg).trajectory;
}

HorizonTrajectory apply_offsets(const HorizonTrajectory& t_h, const VehicleState& state,
                                const OffsetVector& o) {
  if (t_h.frame != Frame::kWorld) {
    throw ValidationError("apply_offsets: expected a world-frame trajectory");
  }
  if (t_h.points.size() != o.o.size()) {
    throw ValidationError("apply_offsets: " + std::to_string(o.o.size()) + " offsets for " +
                          std::to_string(t_h.points.size()) + " points");
  }
  const Pose2D pose = state.pose();
  HorizonTrajectory out;
  out.frame = Frame::kWorld;
  out.points.reserve(t_h.points.size());
  for (std::size_t i = 0; i < t_h.points.size(); ++i) {
    Point2D local = world_to_vehicle(pose, t_h.points[i]);
    local.y += o.o[i];
    out.points.push_back(vehicle_to_world(pose, local));
  }
  return out;
}

Eigen::VectorXd Observation::flatten() const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(scan.size() + local_horizon.size() + 1));
  Eigen::Index k = 0;
  for (double s : scan) v[k++] = s;
  for (double h : local_horizon) v[k++] = h;
  v[k] = speed;
  return v;
}

Observation build_observation(const PolarScan& scan, const HorizonTrajectory& t_h,
                              const VehicleState& state, const LidarConfig& lidar) {
  if (static_cast<int>(scan.beam_count()) != lidar.beam_count) {
    throw ValidationError("build_observation: scan has " + std::to_string(scan.beam_count()) +
                          " beams, expected " + std::to_string(lidar.beam_count));
  }
  if (t_h.frame != Frame::kWorld) {
    throw ValidationError("build_observation: expected a world-frame trajectory");
  }
  Observation obs;
  obs.scan.reserve(scan.ranges.size());
  for (double r : scan.ranges) obs.scan.push_back(r / lidar.range_max);
  obs.local_horizon.reserve(2 * t_h.points.size());
  const Pose2D pose = state.pose();
  for (const Point2D& p : t_h.points) {
    const Point2D local = world_to_vehicle(pose, p);
    obs.local_horizon.push_back(local.x);
    obs.local_horizon.push_back(local.y);
  }
  obs.speed = state.v;
  return obs;
}

OffsetVector plan_step(const ActorCritic& policy, const Observation& obs,
                       const PlanningConfig& cfg, bool deterministic, Rng& rng) {
  const Eigen::VectorXd flat = obs.flatten();
  if (flat.size() != policy.input_dim()) {
    throw ValidationError("plan_step: observation dimension " + std::to_string(flat.size()) +
                          " != policy input " + std::to_string(policy.input_dim()));
  }
  const Eigen::VectorXd offsets =
      deterministic ? Eigen::VectorXd(policy_mean_offsets(policy, flat, cfg.o_max))
                    : policy_sample_offsets(policy, flat, cfg.o_max, rng).offsets;
  OffsetVector out;
  out.o.assign(offsets.data(), offsets.data() + offsets.size());
  return out;
}

}  // namespace raceplan
