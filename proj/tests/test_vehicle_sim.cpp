#include <doctest.h>

#include <cmath>
#include <fstream>

#include "raceplan/error.hpp"
#include "raceplan/rng.hpp"
#include "raceplan/vehicle_sim.hpp"

using namespace raceplan;

namespace {

// Empty square room with occupied walls, side meters, origin at (0,0).
OccupancyGrid empty_room(double side, double resolution) {
  OccupancyGrid grid;
  grid.resolution = resolution;
  grid.width = static_cast<int>(std::lround(side / resolution));
  grid.height = grid.width;
  grid.origin = Pose2D{0, 0, 0};
  grid.cells.assign(static_cast<std::size_t>(grid.width) * grid.height, 0);
  for (int i = 0; i < grid.width; ++i) {
    grid.set_occupied(i, 0, true);
    grid.set_occupied(i, grid.height - 1, true);
    grid.set_occupied(0, i, true);
    grid.set_occupied(grid.width - 1, i, true);
  }
  return grid;
}

// Forward-Euler reference integrator at a much finer step.
SimState euler_oracle(SimState s, const Action& a, const VehicleParams& p, double total_time,
                      double dt) {
  const long steps = std::lround(total_time / dt);
  for (long i = 0; i < steps; ++i) {
    const double ax = std::clamp((a.v_des - s.state.v) / kSpeedLagTau, -p.a_max, p.a_max);
    const double sx =
        std::clamp((a.delta_des - s.steer) / kSteerLagTau, -p.steer_rate_max, p.steer_rate_max);
    const double c = std::cos(s.state.theta);
    const double si = std::sin(s.state.theta);
    const double w = s.state.v * std::tan(s.steer) / p.wheelbase;
    s.state.x += dt * s.state.v * c;
    s.state.y += dt * s.state.v * si;
    s.state.theta += dt * w;
    s.state.v += dt * ax;
    s.steer += dt * sx;
  }
  s.state.theta = wrap_angle(s.state.theta);
  return s;
}

}  // namespace

TEST_CASE("step_dynamics: straight motion advances x only") {
  VehicleParams p;
  const VehicleState s{0, 0, 1.0, 0};
  const VehicleState out = step_dynamics(s, Action{0.0, 1.0}, p, 0.01);
  CHECK(out.x == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(out.y == doctest::Approx(0.0));
  CHECK(out.theta == doctest::Approx(0.0));
  CHECK(out.v == doctest::Approx(1.0));
}

TEST_CASE("step_dynamics: fixed steering traces the analytic circle") {
  VehicleParams p;
  for (double delta : {0.1, 0.25, p.delta_max}) {
    const double radius = p.wheelbase / std::tan(delta);
    const double speed = 1.0;
    SimState s;
    s.state = VehicleState{0, 0, speed, 0};
    s.steer = delta;
    const Action a{delta, speed};
    // One full revolution: time = 2*pi*radius / speed.
    const double total = 2.0 * M_PI * radius / speed;
    const int steps = static_cast<int>(std::ceil(total / 0.01));
    const double dt = total / steps;
    double max_radius_err = 0.0;
    // Circle center sits at (0, radius) for this start.
    for (int i = 0; i < steps; ++i) {
      s = step_dynamics(s, a, p, dt);
      const double r = std::hypot(s.state.x, s.state.y - radius);
      max_radius_err = std::max(max_radius_err, std::abs(r - radius));
    }
    CHECK(max_radius_err / radius < 1e-3);
    // Back near the start after one revolution.
    CHECK(std::hypot(s.state.x, s.state.y) < 1e-3 * radius);
  }
}

TEST_CASE("step_dynamics RK4 matches a fine-step Euler oracle") {
  VehicleParams p;
  SimState s;
  s.state = VehicleState{0.2, -0.1, 1.0, 0.3};
  s.steer = 0.05;
  // Commands inside the rate limits keep the dynamics smooth.
  const Action a{0.08, 1.2};
  SimState rk = s;
  for (int i = 0; i < 100; ++i) rk = step_dynamics(rk, a, p, 0.01);
  const SimState ref = euler_oracle(s, a, p, 1.0, 1e-6);
  CHECK(std::abs(rk.state.x - ref.state.x) < 1e-6);
  CHECK(std::abs(rk.state.y - ref.state.y) < 1e-6);
  CHECK(std::abs(rk.state.v - ref.state.v) < 1e-6);
  CHECK(std::abs(rk.state.theta - ref.state.theta) < 1e-6);
  CHECK(std::abs(rk.steer - ref.steer) < 1e-6);
}

TEST_CASE("step_dynamics: zero speed command is non-increasing and converges") {
  VehicleParams p;
  SimState s;
  s.state = VehicleState{0, 0, 2.0, 0};
  double prev_v = s.state.v;
  double prev_x = s.state.x;
  for (int i = 0; i < 600; ++i) {
    s = step_dynamics(s, Action{0.0, 0.0}, p, 0.01);
    CHECK(s.state.v <= prev_v + 1e-12);
    prev_v = s.state.v;
    prev_x = s.state.x;
  }
  CHECK(s.state.v < 1e-6);
  for (int i = 0; i < 100; ++i) s = step_dynamics(s, Action{0.0, 0.0}, p, 0.01);
  CHECK(s.state.x - prev_x < 1e-6);  // position has settled
}

TEST_CASE("step_dynamics clamps commands silently") {
  VehicleParams p;
  const VehicleState s{0, 0, 2.0, 0};
  const VehicleState out = step_dynamics(s, Action{10.0, 99.0}, p, 0.5);
  CHECK(out.v <= p.v_max + 1e-12);
}

TEST_CASE("raycast: wall distance in an empty room") {
  const OccupancyGrid grid = empty_room(10.0, 0.05);
  const Pose2D pose{5.0, 5.0, 0.0};
  const PolarScan scan = raycast(grid, pose, 1, 0.0, 10.0);
  REQUIRE(scan.ranges.size() == 1);
  // Wall cells start at x = 9.95; the beam starts at x = 5.
  CHECK(scan.ranges[0] == doctest::Approx(4.95).epsilon(1e-9));

  // Beams at +-3pi/4 and +-pi/4 reach the walls along the diagonal.
  const PolarScan four = raycast(grid, Pose2D{5.0, 5.0, 0.0}, 4, 3.0 * M_PI / 2.0, 10.0);
  for (double r : four.ranges) {
    CHECK(r == doctest::Approx(4.95 * std::sqrt(2.0)).epsilon(0.02));
  }
}

TEST_CASE("raycast caps at range_max and divides the fov") {
  const OccupancyGrid grid = empty_room(50.0, 0.1);
  const PolarScan scan = raycast(grid, Pose2D{25.0, 25.0, 0.0}, 108, 4.7, 10.0);
  REQUIRE(scan.ranges.size() == 108);
  CHECK(scan.angle_increment == doctest::Approx(4.7 / 107.0));
  CHECK(scan.angle_min == doctest::Approx(-2.35));
  for (double r : scan.ranges) CHECK(r == doctest::Approx(10.0));  // nothing within range
}

TEST_CASE("raycast from an occupied cell returns all zeros") {
  const OccupancyGrid grid = empty_room(10.0, 0.05);
  const PolarScan scan = raycast(grid, Pose2D{0.01, 0.01, 0.0}, 8, 4.7, 10.0);
  for (double r : scan.ranges) CHECK(r == 0.0);
}

TEST_CASE("raycast hit distances match the analytic oracle at odd angles") {
  const OccupancyGrid grid = empty_room(10.0, 0.05);
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const double angle = rng.uniform(-M_PI, M_PI);
    const PolarScan scan = raycast(grid, Pose2D{5.0, 5.0, angle}, 1, 0.0, 20.0);
    // Analytic distance to the inner wall surface at 9.95 / 0.05.
    const double c = std::cos(angle), s = std::sin(angle);
    double t = 1e30;
    if (c > 1e-12) t = std::min(t, (9.95 - 5.0) / c);
    if (c < -1e-12) t = std::min(t, (0.05 - 5.0) / c);
    if (s > 1e-12) t = std::min(t, (9.95 - 5.0) / s);
    if (s < -1e-12) t = std::min(t, (0.05 - 5.0) / s);
    CHECK(scan.ranges[0] == doctest::Approx(t).epsilon(0.02));
  }
}

TEST_CASE("check_collision: free space, wall overlap, grazing contact") {
  const OccupancyGrid grid = empty_room(10.0, 0.05);
  VehicleParams p;
  CHECK_FALSE(check_collision(grid, VehicleState{5, 5, 0, 0}, p));
  CHECK(check_collision(grid, VehicleState{9.9, 5, 0, 0}, p));

  // Body front edge exactly on the wall-cell boundary at x = 9.95.
  // Front edge = x + wheelbase/2 + body_length/2.
  const double x_grazing = 9.95 - p.wheelbase / 2.0 - p.body_length / 2.0;
  CHECK(check_collision(grid, VehicleState{x_grazing, 5, 0, 0}, p));
  CHECK_FALSE(check_collision(grid, VehicleState{x_grazing - 0.01, 5, 0, 0}, p));
}

TEST_CASE("place_obstacles: no-op, 7x7 footprint, disjoint count") {
  const OccupancyGrid grid = empty_room(10.0, 0.05);
  Raceline r;
  r.closed = true;
  // Waypoints placed on cell centers so the footprint is unambiguous.
  r.waypoints = {{2.025, 2.025, 1, 0, 0}, {5.025, 5.025, 1, 0, 0}, {2.025, 5.025, 1, 0, 0}};

  const OccupancyGrid same = place_obstacles(grid, r, {});
  CHECK(same.cells == grid.cells);

  auto count_occupied = [](const OccupancyGrid& g) {
    int n = 0;
    for (auto c : g.cells) n += c != 0;
    return n;
  };
  const int walls = count_occupied(grid);

  const OccupancyGrid one = place_obstacles(grid, r, {{0, 0.0, 0.35}});
  CHECK(count_occupied(one) - walls == 49);  // 0.35 m at 0.05 m/cell = 7x7

  const OccupancyGrid two = place_obstacles(grid, r, {{0, 0.0, 0.35}, {1, 0.0, 0.35}});
  CHECK(count_occupied(two) - walls == 98);

  CHECK_THROWS_WITH_AS(place_obstacles(grid, r, {{7, 0.0, 0.35}}),
                       doctest::Contains("obstacle 0"), ValidationError);
  // Footprint sticking out of the grid names the obstacle index.
  Raceline edge = r;
  edge.waypoints[0].x = 0.01;
  CHECK_THROWS_WITH_AS(place_obstacles(grid, edge, {{0, 0.0, 0.35}}),
                       doctest::Contains("obstacle 0"), ValidationError);
}

TEST_CASE("obstacle placement shifts along the waypoint left normal") {
  const OccupancyGrid grid = empty_room(10.0, 0.05);
  Raceline r;
  r.closed = true;
  r.waypoints = {{5.025, 5.025, 1, 0, 0}, {6, 5, 1, 0, 0}, {6, 6, 1, 0, 0}};
  // Heading 0: left normal is +y.
  const OccupancyGrid shifted = place_obstacles(grid, r, {{0, 0.5, 0.35}});
  const Point2D g = shifted.to_grid({5.025, 5.525});
  CHECK(shifted.occupied(static_cast<int>(g.x), static_cast<int>(g.y)));
  const Point2D g0 = shifted.to_grid({5.025, 5.025});
  CHECK_FALSE(shifted.occupied(static_cast<int>(g0.x), static_cast<int>(g0.y)));
}

TEST_CASE("compute_reward follows the survival/offset/collision form") {
  RewardConfig cfg;
  CHECK(compute_reward(10, std::vector<double>(10, 0.0), false, cfg) ==
        doctest::Approx(1000.0));
  std::vector<double> o(10, 0.0);
  o[0] = 0.3;
  o[1] = 0.4;
  CHECK(compute_reward(10, o, false, cfg) == doctest::Approx(999.5));
  CHECK(compute_reward(10, std::vector<double>(10, 0.0), true, cfg) == doctest::Approx(0.0));
}

TEST_CASE("reward monotonicity: collision costs exactly C") {
  Rng rng(22);
  RewardConfig cfg;
  for (int i = 0; i < 100; ++i) {
    std::vector<double> o;
    for (int j = 0; j < 10; ++j) o.push_back(rng.uniform(-1.0, 1.0));
    const int dn = static_cast<int>(rng.uniform_index(11));
    const double clean = compute_reward(dn, o, false, cfg);
    const double crashed = compute_reward(dn, o, true, cfg);
    CHECK(clean - crashed == doctest::Approx(cfg.collision_penalty).epsilon(1e-12));
  }
}

TEST_CASE("occupancy map round trip through PGM plus sidecar") {
  OccupancyGrid grid = empty_room(3.0, 0.1);
  grid.origin = Pose2D{-1.5, 2.0, 0.0};
  grid.set_occupied(10, 12, true);
  grid.set_occupied(11, 12, true);
  save_occupancy_map(grid, "/tmp/raceplan_test_map.pgm");
  const OccupancyGrid back = load_occupancy_map("/tmp/raceplan_test_map.pgm");
  CHECK(back.width == grid.width);
  CHECK(back.height == grid.height);
  CHECK(back.resolution == doctest::Approx(grid.resolution));
  CHECK(back.origin.x == doctest::Approx(grid.origin.x));
  CHECK(back.origin.y == doctest::Approx(grid.origin.y));
  CHECK(back.cells == grid.cells);
}

TEST_CASE("rasterize_track frees the corridor and walls the rest") {
  const TrackCenterline track = make_oval_centerline(6.0, 2.0, 1.1, 0.1);
  const OccupancyGrid grid = rasterize_track(track, 0.05);
  // Centerline points are free, far corners occupied.
  for (std::size_t i = 0; i < track.size(); i += 7) {
    CHECK_FALSE(grid.occupied_world(track.centers[i]));
  }
  CHECK(grid.occupied_world({grid.origin.x + 0.01, grid.origin.y + 0.01}));
  // A point just outside the corridor is occupied: center of the stadium.
  CHECK(grid.occupied_world({0.0, 0.0}));
}
