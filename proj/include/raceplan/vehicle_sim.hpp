#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "raceplan/geometry.hpp"
#include "raceplan/track.hpp"

namespace raceplan {

// Single-track kinematic state; the position is the center of the rear axle.
struct VehicleState {
  double x = 0.0;
  double y = 0.0;
  double v = 0.0;
  double theta = 0.0;

  Pose2D pose() const { return {x, y, theta}; }
  Point2D position() const { return {x, y}; }
};

// Desired steering angle and longitudinal speed.
struct Action {
  double delta_des = 0.0;
  double v_des = 0.0;
};

struct VehicleParams {
  double wheelbase = 0.33;        // m
  double delta_max = 0.4189;      // rad
  double v_max = 4.0;             // m/s
  double a_max = 3.0;             // m/s^2
  double steer_rate_max = 3.2;    // rad/s
  double body_length = 0.58;      // m
  double body_width = 0.31;       // m
};

// First-order actuator lag time constants (speed and steering tracking of the
// commanded values, rate-limited by a_max / steer_rate_max).
constexpr double kSpeedLagTau = 0.25;  // s
constexpr double kSteerLagTau = 0.10;  // s

// Full integration state: pose + speed plus the actual steering angle, which
// lags the commanded value.
struct SimState {
  VehicleState state;
  double steer = 0.0;
};

// One RK4 step of the kinematic bicycle model with actuator lag. Commands
// outside the actuator bounds are clamped silently.
SimState step_dynamics(const SimState& s, const Action& a, const VehicleParams& p, double dt);

// Convenience overload: steering starts at the commanded angle (no transient).
VehicleState step_dynamics(const VehicleState& s, const Action& a, const VehicleParams& p,
                           double dt);

// Boolean occupancy raster. Cells outside the grid count as occupied.
struct OccupancyGrid {
  int width = 0;
  int height = 0;
  double resolution = 0.05;  // m per cell
  Pose2D origin;             // world pose of the (0,0) cell corner
  std::vector<std::uint8_t> cells;  // row-major, 1 = occupied

  bool occupied(int ix, int iy) const {
    if (ix < 0 || iy < 0 || ix >= width || iy >= height) return true;
    return cells[static_cast<std::size_t>(iy) * width + ix] != 0;
  }
  void set_occupied(int ix, int iy, bool value) {
    cells[static_cast<std::size_t>(iy) * width + ix] = value ? 1 : 0;
  }
  // World point into grid coordinates (continuous cell units).
  Point2D to_grid(const Point2D& p) const;
  Point2D cell_center(int ix, int iy) const;
  // Occupancy at a world point; points exactly on a cell edge take the
  // occupied verdict of any touching cell (closed overlap convention).
  bool occupied_world(const Point2D& p) const;
};

struct LidarConfig {
  int beam_count = 108;
  double fov = 4.7;        // rad, centered on the heading
  double range_max = 10.0;  // m
};

// Distance to the first occupied cell along each beam (grid traversal),
// capped at range_max. A pose inside an occupied cell yields all-zero ranges.
PolarScan raycast(const OccupancyGrid& grid, const Pose2D& pose, int beam_count, double fov,
                  double range_max);

// True iff the oriented body rectangle overlaps any occupied cell. The
// rectangle is centered half a wheelbase ahead of the rear axle and sampled
// at <= resolution/2 spacing.
bool check_collision(const OccupancyGrid& grid, const VehicleState& state,
                     const VehicleParams& params);

// Static square obstacle: placed at a waypoint, shifted along the waypoint's
// left normal. Side length defaults to a full car width (0.35 m).
struct ObstacleSpec {
  std::size_t waypoint_index = 0;
  double lateral_shift = 0.0;  // m, + = left of the raceline
  double size = 0.35;          // m
};

// Returns a copy of the grid with the obstacle squares marked occupied.
// Throws ValidationError naming the obstacle index if a footprint leaves the
// grid.
OccupancyGrid place_obstacles(const OccupancyGrid& grid, const Raceline& raceline,
                              const std::vector<ObstacleSpec>& spec);

struct RewardConfig {
  double step_coeff = 100.0;          // per 0.01 s sub-step survived
  double collision_penalty = 1000.0;  // C
};

// r = step_coeff * substeps_survived - ||offsets||_2 - C * [collided]
double compute_reward(int substeps_survived, const std::vector<double>& offsets, bool collided,
                      const RewardConfig& config);

// --- map IO: P2 portable graymap (0 = occupied, 255 = free, threshold 128)
//     plus a `key: value` sidecar (resolution, origin_x, origin_y,
//     origin_theta) at the same path with extension `.info`. ---

OccupancyGrid load_occupancy_map(const std::string& pgm_path);
void save_occupancy_map(const OccupancyGrid& grid, const std::string& pgm_path);

// Rasterizes a corridor map: cells within the per-side half widths of the
// centerline are free, everything else occupied.
OccupancyGrid rasterize_track(const TrackCenterline& track, double resolution = 0.05,
                              double border = 0.6);

}  // namespace raceplan
