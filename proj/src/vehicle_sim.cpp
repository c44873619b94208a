#include "raceplan/vehicle_sim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "raceplan/error.hpp"

namespace raceplan {

namespace {

struct StateVec {
  double x, y, theta, v, steer;
};

StateVec derivative(const StateVec& s, const Action& a, const VehicleParams& p) {
  StateVec d;
  d.x = s.v * std::cos(s.theta);
  d.y = s.v * std::sin(s.theta);
  d.theta = s.v * std::tan(s.steer) / p.wheelbase;
  d.v = std::clamp((a.v_des - s.v) / kSpeedLagTau, -p.a_max, p.a_max);
  d.steer = std::clamp((a.delta_des - s.steer) / kSteerLagTau, -p.steer_rate_max,
                       p.steer_rate_max);
  return d;
}

StateVec axpy(const StateVec& s, double h, const StateVec& d) {
  return {s.x + h * d.x, s.y + h * d.y, s.theta + h * d.theta, s.v + h * d.v,
          s.steer + h * d.steer};
}

}  // namespace

SimState step_dynamics(const SimState& s, const Action& a, const VehicleParams& p, double dt) {
  Action cmd;
  cmd.delta_des = std::clamp(a.delta_des, -p.delta_max, p.delta_max);
  cmd.v_des = std::clamp(a.v_des, 0.0, p.v_max);

  StateVec y{s.state.x, s.state.y, s.state.theta, s.state.v, s.steer};
  const StateVec k1 = derivative(y, cmd, p);
  const StateVec k2 = derivative(axpy(y, dt / 2.0, k1), cmd, p);
  const StateVec k3 = derivative(axpy(y, dt / 2.0, k2), cmd, p);
  const StateVec k4 = derivative(axpy(y, dt, k3), cmd, p);

  StateVec out = y;
  out.x += dt / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
  out.y += dt / 6.0 * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y);
  out.theta += dt / 6.0 * (k1.theta + 2.0 * k2.theta + 2.0 * k3.theta + k4.theta);
  out.v += dt / 6.0 * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v);
  out.steer += dt / 6.0 * (k1.steer + 2.0 * k2.steer + 2.0 * k3.steer + k4.steer);

  SimState result;
  result.state.x = out.x;
  result.state.y = out.y;
  result.state.theta = wrap_angle(out.theta);
  result.state.v = std::clamp(out.v, 0.0, p.v_max);
  result.steer = std::clamp(out.steer, -p.delta_max, p.delta_max);
  return result;
}

VehicleState step_dynamics(const VehicleState& s, const Action& a, const VehicleParams& p,
                           double dt) {
  SimState full;
  full.state = s;
  full.steer = std::clamp(a.delta_des, -p.delta_max, p.delta_max);
  return step_dynamics(full, a, p, dt).state;
}

Point2D OccupancyGrid::to_grid(const Point2D& p) const {
  const double c = std::cos(origin.theta);
  const double s = std::sin(origin.theta);
  const double dx = p.x - origin.x;
  const double dy = p.y - origin.y;
  return {(c * dx + s * dy) / resolution, (-s * dx + c * dy) / resolution};
}

Point2D OccupancyGrid::cell_center(int ix, int iy) const {
  const double gx = (ix + 0.5) * resolution;
  const double gy = (iy + 0.5) * resolution;
  const double c = std::cos(origin.theta);
  const double s = std::sin(origin.theta);
  return {origin.x + c * gx - s * gy, origin.y + s * gx + c * gy};
}

bool OccupancyGrid::occupied_world(const Point2D& p) const {
  const Point2D g = to_grid(p);
  // A coordinate exactly on a cell edge belongs to both neighbours.
  constexpr double kEdgeEps = 1e-9;
  const double rx = g.x - std::round(g.x);
  const double ry = g.y - std::round(g.y);
  std::array<int, 2> xs{static_cast<int>(std::floor(g.x)), 0};
  std::array<int, 2> ys{static_cast<int>(std::floor(g.y)), 0};
  int nx = 1, ny = 1;
  if (std::abs(rx) < kEdgeEps) {
    xs[0] = static_cast<int>(std::round(g.x)) - 1;
    xs[1] = xs[0] + 1;
    nx = 2;
  }
  if (std::abs(ry) < kEdgeEps) {
    ys[0] = static_cast<int>(std::round(g.y)) - 1;
    ys[1] = ys[0] + 1;
    ny = 2;
  }
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      if (occupied(xs[i], ys[j])) return true;
    }
  }
  return false;
}

PolarScan raycast(const OccupancyGrid& grid, const Pose2D& pose, int beam_count, double fov,
                  double range_max) {
  PolarScan scan;
  scan.angle_min = -fov / 2.0;
  scan.angle_increment = beam_count > 1 ? fov / (beam_count - 1) : 0.0;
  scan.ranges.assign(static_cast<std::size_t>(beam_count), 0.0);

  const Point2D start = grid.to_grid({pose.x, pose.y});
  int ix = static_cast<int>(std::floor(start.x));
  int iy = static_cast<int>(std::floor(start.y));
  if (grid.occupied(ix, iy)) return scan;  // inside a wall: all zeros

  for (int b = 0; b < beam_count; ++b) {
    const double beam_angle =
        pose.theta + scan.angle_min + b * scan.angle_increment - grid.origin.theta;
    const double dx = std::cos(beam_angle);
    const double dy = std::sin(beam_angle);

    // Amanatides-Woo traversal in grid units; t is measured in meters.
    int cx = ix, cy = iy;
    const int step_x = dx > 0.0 ? 1 : -1;
    const int step_y = dy > 0.0 ? 1 : -1;
    const double t_delta_x = dx != 0.0 ? grid.resolution / std::abs(dx)
                                       : std::numeric_limits<double>::infinity();
    const double t_delta_y = dy != 0.0 ? grid.resolution / std::abs(dy)
                                       : std::numeric_limits<double>::infinity();
    const double fx = start.x - cx;
    const double fy = start.y - cy;
    double t_max_x = dx > 0.0   ? (1.0 - fx) * t_delta_x
                     : dx < 0.0 ? fx * t_delta_x
                                : std::numeric_limits<double>::infinity();
    double t_max_y = dy > 0.0   ? (1.0 - fy) * t_delta_y
                     : dy < 0.0 ? fy * t_delta_y
                                : std::numeric_limits<double>::infinity();

    double range = range_max;
    while (true) {
      double t;
      if (t_max_x < t_max_y) {
        t = t_max_x;
        t_max_x += t_delta_x;
        cx += step_x;
      } else {
        t = t_max_y;
        t_max_y += t_delta_y;
        cy += step_y;
      }
      if (t >= range_max) break;
      if (grid.occupied(cx, cy)) {
        range = t;
        break;
      }
    }
    scan.ranges[static_cast<std::size_t>(b)] = range;
  }
  return scan;
}

bool check_collision(const OccupancyGrid& grid, const VehicleState& state,
                     const VehicleParams& params) {
  const double c = std::cos(state.theta);
  const double s = std::sin(state.theta);
  // Body center sits half a wheelbase ahead of the rear axle.
  const double cx = state.x + c * params.wheelbase / 2.0;
  const double cy = state.y + s * params.wheelbase / 2.0;

  const double spacing = grid.resolution / 2.0;
  const int nl = std::max(1, static_cast<int>(std::ceil(params.body_length / spacing)));
  const int nw = std::max(1, static_cast<int>(std::ceil(params.body_width / spacing)));
  for (int i = 0; i <= nl; ++i) {
    const double lx = -params.body_length / 2.0 + params.body_length * i / nl;
    for (int j = 0; j <= nw; ++j) {
      const double ly = -params.body_width / 2.0 + params.body_width * j / nw;
      const Point2D p{cx + c * lx - s * ly, cy + s * lx + c * ly};
      if (grid.occupied_world(p)) return true;
    }
  }
  return false;
}

OccupancyGrid place_obstacles(const OccupancyGrid& grid, const Raceline& raceline,
                              const std::vector<ObstacleSpec>& spec) {
  OccupancyGrid out = grid;
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const ObstacleSpec& ob = spec[k];
    if (ob.waypoint_index >= raceline.size()) {
      throw ValidationError("obstacle " + std::to_string(k) + ": waypoint index " +
                            std::to_string(ob.waypoint_index) + " out of range");
    }
    const Waypoint& w = raceline.waypoints[ob.waypoint_index];
    const Point2D center{w.x - std::sin(w.theta) * ob.lateral_shift,
                         w.y + std::cos(w.theta) * ob.lateral_shift};
    const double half = ob.size / 2.0;
    const Point2D lo = out.to_grid({center.x - half, center.y - half});
    const Point2D hi = out.to_grid({center.x + half, center.y + half});
    if (lo.x < 0.0 || lo.y < 0.0 || hi.x > out.width || hi.y > out.height) {
      throw ValidationError("obstacle " + std::to_string(k) + ": footprint leaves the grid");
    }
    // Mark every cell whose center lies inside the closed square.
    const int ix0 = static_cast<int>(std::floor(lo.x - 0.5));
    const int iy0 = static_cast<int>(std::floor(lo.y - 0.5));
    const int ix1 = static_cast<int>(std::ceil(hi.x + 0.5));
    const int iy1 = static_cast<int>(std::ceil(hi.y + 0.5));
    for (int iy = std::max(0, iy0); iy <= std::min(out.height - 1, iy1); ++iy) {
      for (int ix = std::max(0, ix0); ix <= std::min(out.width - 1, ix1); ++ix) {
        const Point2D cc = out.cell_center(ix, iy);
        if (std::abs(cc.x - center.x) <= half && std::abs(cc.y - center.y) <= half) {
          out.set_occupied(ix, iy, true);
        }
      }
    }
  }
  return out;
}

double compute_reward(int substeps_survived, const std::vector<double>& offsets, bool collided,
                      const RewardConfig& config) {
  double norm2 = 0.0;
  for (double o : offsets) norm2 += o * o;
  return config.step_coeff * substeps_survived - std::sqrt(norm2) -
         (collided ? config.collision_penalty : 0.0);
}

namespace {

std::string sidecar_path(const std::string& pgm_path) {
  const std::size_t dot = pgm_path.find_last_of('.');
  const std::size_t slash = pgm_path.find_last_of('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) {
    return pgm_path + ".info";
  }
  return pgm_path.substr(0, dot) + ".info";
}

}  // namespace

OccupancyGrid load_occupancy_map(const std::string& pgm_path) {
  std::ifstream in(pgm_path);
  if (!in) throw ParseError("cannot open map: " + pgm_path);
  std::string magic;
  in >> magic;
  if (magic != "P2") throw ParseError(pgm_path + ": expected P2 graymap, got '" + magic + "'");

  auto next_token = [&in, &pgm_path]() {
    std::string tok;
    while (in >> tok) {
      if (tok[0] == '#') {
        std::string rest;
        std::getline(in, rest);
        continue;
      }
      return tok;
    }
    throw ParseError(pgm_path + ": truncated graymap");
  };

  OccupancyGrid grid;
  grid.width = std::stoi(next_token());
  grid.height = std::stoi(next_token());
  const int maxval = std::stoi(next_token());
  if (grid.width <= 0 || grid.height <= 0 || maxval <= 0) {
    throw ParseError(pgm_path + ": bad graymap dimensions");
  }
  grid.cells.assign(static_cast<std::size_t>(grid.width) * grid.height, 0);
  // PGM rows run top to bottom; our row 0 is the bottom of the map.
  for (int row = 0; row < grid.height; ++row) {
    const int iy = grid.height - 1 - row;
    for (int ix = 0; ix < grid.width; ++ix) {
      const int value = std::stoi(next_token());
      grid.set_occupied(ix, iy, value < 128);
    }
  }

  const std::string info = sidecar_path(pgm_path);
  std::ifstream meta(info);
  if (!meta) throw ParseError("cannot open map sidecar: " + info);
  std::string line;
  while (std::getline(meta, line)) {
    const std::size_t colon = line.find(':');
    if (colon == std::string::npos) continue;
    const std::string key = line.substr(0, colon);
    const double value = std::stod(line.substr(colon + 1));
    if (key == "resolution") grid.resolution = value;
    else if (key == "origin_x") grid.origin.x = value;
    else if (key == "origin_y") grid.origin.y = value;
    else if (key == "origin_theta") grid.origin.theta = wrap_angle(value);
    else throw ParseError(info + ": unknown key '" + key + "'");
  }
  if (grid.resolution <= 0.0) throw ValidationError(info + ": resolution must be positive");
  return grid;
}

void save_occupancy_map(const OccupancyGrid& grid, const std::string& pgm_path) {
  std::ofstream out(pgm_path, std::ios::binary);
  if (!out) throw Error("cannot open map for writing: " + pgm_path);
  out << "P2\n" << grid.width << " " << grid.height << "\n255\n";
  for (int row = 0; row < grid.height; ++row) {
    const int iy = grid.height - 1 - row;
    for (int ix = 0; ix < grid.width; ++ix) {
      out << (grid.occupied(ix, iy) ? 0 : 255) << (ix + 1 == grid.width ? '\n' : ' ');
    }
  }
  std::ofstream meta(sidecar_path(pgm_path), std::ios::binary);
  if (!meta) throw Error("cannot open map sidecar for writing");
  meta << "resolution: " << grid.resolution << "\n";
  meta << "origin_x: " << grid.origin.x << "\n";
  meta << "origin_y: " << grid.origin.y << "\n";
  meta << "origin_theta: " << grid.origin.theta << "\n";
}

OccupancyGrid rasterize_track(const TrackCenterline& track, double resolution, double border) {
  double min_x = std::numeric_limits<double>::infinity(), min_y = min_x;
  double max_x = -min_x, max_y = -min_y;
  double max_w = 0.0;
  for (std::size_t i = 0; i < track.size(); ++i) {
    min_x = std::min(min_x, track.centers[i].x);
    max_x = std::max(max_x, track.centers[i].x);
    min_y = std::min(min_y, track.centers[i].y);
    max_y = std::max(max_y, track.centers[i].y);
    max_w = std::max({max_w, track.half_width_left[i], track.half_width_right[i]});
  }
  const double pad = max_w + border;

  OccupancyGrid grid;
  grid.resolution = resolution;
  grid.origin = Pose2D{min_x - pad, min_y - pad, 0.0};
  grid.width = static_cast<int>(std::ceil((max_x - min_x + 2.0 * pad) / resolution));
  grid.height = static_cast<int>(std::ceil((max_y - min_y + 2.0 * pad) / resolution));
  grid.cells.assign(static_cast<std::size_t>(grid.width) * grid.height, 1);

  const std::size_t n = track.size();
  const std::size_t segs = track.closed ? n : n - 1;
  for (int iy = 0; iy < grid.height; ++iy) {
    for (int ix = 0; ix < grid.width; ++ix) {
      const Point2D p = grid.cell_center(ix, iy);
      bool inside = false;
      for (std::size_t s = 0; s < segs && !inside; ++s) {
        const Point2D a = track.centers[s];
        const Point2D b = track.centers[(s + 1) % n];
        const Point2D ab = b - a;
        const double len2 = dot(ab, ab);
        double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        const Point2D q = a + t * ab;
        const double d = distance(p, q);
        const double side = cross(ab, p - a);  // + = left of the segment
        const double limit = side >= 0.0
                                 ? track.half_width_left[s] +
                                       t * (track.half_width_left[(s + 1) % n] -
                                            track.half_width_left[s])
                                 : track.half_width_right[s] +
                                       t * (track.half_width_right[(s + 1) % n] -
                                            track.half_width_right[s]);
        inside = d <= limit;
      }
      if (inside) grid.set_occupied(ix, iy, false);
    }
  }
  return grid;
}

}  // namespace raceplan
