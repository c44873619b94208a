#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "raceplan/error.hpp"
#include "raceplan/rng.hpp"
#include "raceplan/track.hpp"

using namespace raceplan;

namespace {

Raceline square_raceline() {
  Raceline r;
  r.closed = true;
  r.waypoints = {
      {0, 0, 1, 0, 0}, {2, 0, 1, M_PI / 2, 0}, {2, 2, 1, M_PI, 0}, {0, 2, 1, -M_PI / 2, 0}};
  return r;
}

Raceline straight_raceline(int n, double spacing, double speed = 1.0) {
  Raceline r;
  r.closed = false;
  for (int i = 0; i < n; ++i) r.waypoints.push_back({i * spacing, 0.0, speed, 0.0, 0.0});
  return r;
}

std::string temp_path(const char* name) {
  return std::string("/tmp/raceplan_test_") + name;
}

// Independent arc-length walker: integrates segment lengths step by step.
Point2D brute_force_arc_point(const Raceline& r, std::size_t start, double s) {
  const std::size_t n = r.size();
  const std::size_t segs = r.closed ? n : n - 1;
  double total = 0.0;
  for (std::size_t k = 0; k < segs; ++k) {
    total += distance(r.position((start + k) % n), r.position((start + k + 1) % n));
  }
  if (r.closed) s = std::fmod(std::fmod(s, total) + total, total);
  for (std::size_t k = 0; k < segs; ++k) {
    const Point2D a = r.position((start + k) % n);
    const Point2D b = r.position((start + k + 1) % n);
    const double len = distance(a, b);
    if (s <= len) return a + (len > 0 ? s / len : 0.0) * (b - a);
    s -= len;
  }
  return r.position((start + segs) % n);
}

}  // namespace

TEST_CASE("load_waypoints parses a minimal square track") {
  const std::string path = temp_path("square.csv");
  {
    std::ofstream out(path);
    out << "x;y;v;theta;gamma\n";
    out << "0;0;1;0;0\n2;0;1;1.5707963;0\n2;2;1;3.1415926;0\n0;2;1;-1.5707963;0\n";
  }
  const Raceline r = load_waypoints(path);
  CHECK(r.size() == 4);
  CHECK(r.closed);
  CHECK(r.waypoints[1].x == doctest::Approx(2.0));
  CHECK(r.perimeter() == doctest::Approx(8.0));
}

TEST_CASE("load_waypoints errors name the problem") {
  CHECK_THROWS_WITH_AS(load_waypoints("/tmp/raceplan_does_not_exist.csv"),
                       doctest::Contains("raceplan_does_not_exist"), ParseError);

  const std::string bad_row = temp_path("bad_row.csv");
  {
    std::ofstream out(bad_row);
    out << "x;y;v;theta;gamma\n0;0;1;0;0\n1;zzz;1;0;0\n";
  }
  CHECK_THROWS_WITH_AS(load_waypoints(bad_row), doctest::Contains(":3"), ParseError);

  const std::string bad_speed = temp_path("bad_speed.csv");
  {
    std::ofstream out(bad_speed);
    out << "x;y;v;theta;gamma\n0;0;1;0;0\n1;0;-1;0;0\n2;0;1;0;0\n";
  }
  CHECK_THROWS_WITH_AS(load_waypoints(bad_speed), doctest::Contains("v must be >= 0"),
                       ValidationError);

  const std::string too_few = temp_path("too_few.csv");
  {
    std::ofstream out(too_few);
    out << "x;y;v;theta;gamma\n0;0;1;0;0\n1;0;1;0;0\n";
  }
  CHECK_THROWS_AS(load_waypoints(too_few), ValidationError);
}

TEST_CASE("waypoint CSV round trip") {
  Rng rng(5);
  Raceline r;
  r.closed = true;
  for (int i = 0; i < 16; ++i) {
    const double a = 2.0 * M_PI * i / 16;
    r.waypoints.push_back({3.0 * std::cos(a), 3.0 * std::sin(a), rng.uniform(0.5, 2.0),
                           wrap_angle(a + M_PI / 2), 1.0 / 3.0});
  }
  const std::string path = temp_path("roundtrip.csv");
  save_waypoints(r, path);
  const Raceline back = load_waypoints(path);
  REQUIRE(back.size() == r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    CHECK(back.waypoints[i].x == r.waypoints[i].x);
    CHECK(back.waypoints[i].v == r.waypoints[i].v);
    CHECK(back.waypoints[i].gamma == r.waypoints[i].gamma);
  }
}

TEST_CASE("closest_waypoint exact hit and tie break") {
  const Raceline r = square_raceline();
  const auto [idx, dist] = closest_waypoint(r, {2.0, 2.0});
  CHECK(idx == 2);
  CHECK(dist == doctest::Approx(0.0));

  // Equidistant from waypoints 0 and 1: the smaller index wins.
  const auto [tie_idx, tie_dist] = closest_waypoint(r, {1.0, 0.0});
  CHECK(tie_idx == 0);
  CHECK(tie_dist == doctest::Approx(1.0));
}

TEST_CASE("closest_waypoint matches a linear-scan oracle") {
  Rng rng(17);
  Raceline r;
  r.closed = true;
  for (int i = 0; i < 50; ++i) {
    const double a = 2.0 * M_PI * i / 50;
    r.waypoints.push_back({5.0 * std::cos(a) + rng.uniform(-0.1, 0.1),
                           5.0 * std::sin(a) + rng.uniform(-0.1, 0.1), 1.0, 0.0, 0.0});
  }
  for (int trial = 0; trial < 200; ++trial) {
    const Point2D p{rng.uniform(-6, 6), rng.uniform(-6, 6)};
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double d = distance(r.position(i), p);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    CHECK(closest_waypoint(r, p).first == best);
  }
}

TEST_CASE("resample_by_arclength on a straight line") {
  const Raceline r = straight_raceline(12, 1.0);
  const auto pts = resample_by_arclength(r, 0, 9.0, 10);
  REQUIRE(pts.size() == 10);
  for (int j = 0; j < 10; ++j) {
    CHECK(pts[j].x == doctest::Approx(static_cast<double>(j)).epsilon(1e-12));
    CHECK(pts[j].y == doctest::Approx(0.0));
  }
}

TEST_CASE("resample_by_arclength wraps a closed square") {
  const Raceline r = square_raceline();  // perimeter 8
  const auto pts = resample_by_arclength(r, 0, 8.0, 5);
  REQUIRE(pts.size() == 5);
  CHECK(pts[4].x == doctest::Approx(pts[0].x).epsilon(1e-9));
  CHECK(pts[4].y == doctest::Approx(pts[0].y).epsilon(1e-9));
  CHECK(pts[1].x == doctest::Approx(2.0));
  CHECK(pts[1].y == doctest::Approx(0.0));
}

TEST_CASE("resample_by_arclength matches the cumulative-arclength oracle") {
  Rng rng(23);
  Raceline r;
  r.closed = true;
  for (int i = 0; i < 30; ++i) {
    const double a = 2.0 * M_PI * i / 30;
    const double rad = 4.0 + rng.uniform(-0.5, 0.5);
    r.waypoints.push_back({rad * std::cos(a), rad * std::sin(a), 1.0, 0.0, 0.0});
  }
  const double length = 1.7 * r.perimeter();  // wraps past the seam
  const int count = 37;
  const auto pts = resample_by_arclength(r, 4, length, count);
  REQUIRE(pts.size() == static_cast<std::size_t>(count));
  const double step = length / (count - 1);
  for (int j = 0; j < count; ++j) {
    // Equal arc spacing: each sample sits exactly j*step along the polyline.
    const Point2D oracle = brute_force_arc_point(r, 4, j * step);
    CHECK(std::abs(pts[j].x - oracle.x) < 1e-9);
    CHECK(std::abs(pts[j].y - oracle.y) < 1e-9);
  }
}

TEST_CASE("curvature_profile: circle magnitude, line zeros, orientation sign") {
  std::vector<Point2D> ccw, cw, line;
  for (int i = 0; i < 40; ++i) {
    const double a = 2.0 * M_PI * i / 40;
    ccw.push_back({2.0 * std::cos(a), 2.0 * std::sin(a)});
    cw.push_back({2.0 * std::cos(-a), 2.0 * std::sin(-a)});
    line.push_back({0.3 * i, 0.6 * i});
  }
  for (double g : curvature_profile(ccw, true)) CHECK(g == doctest::Approx(0.5).epsilon(1e-3));
  for (double g : curvature_profile(cw, true)) CHECK(g == doctest::Approx(-0.5).epsilon(1e-3));
  for (double g : curvature_profile(line, false)) CHECK(g == doctest::Approx(0.0));
}

TEST_CASE("curvature_profile is invariant in magnitude under rigid transforms") {
  Rng rng(31);
  std::vector<Point2D> pts;
  for (int i = 0; i < 25; ++i) {
    pts.push_back({0.5 * i, std::sin(0.4 * i) + rng.uniform(-0.05, 0.05)});
  }
  const auto base = curvature_profile(pts, false);
  const Pose2D pose = Pose2D::make(3.0, -2.0, 1.1);
  const auto moved = vehicle_to_world(pose, pts);
  const auto transformed = curvature_profile(moved, false);
  for (std::size_t i = 0; i < base.size(); ++i) {
    CHECK(std::abs(transformed[i]) == doctest::Approx(std::abs(base[i])).epsilon(1e-9));
  }
}

TEST_CASE("project_progress walks monotonically along a square") {
  const Raceline r = square_raceline();
  CHECK(project_progress(r, {0.0, 0.0}) == doctest::Approx(0.0));
  CHECK(project_progress(r, {1.0, -0.1}) == doctest::Approx(1.0));
  CHECK(project_progress(r, {2.1, 1.0}) == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(project_progress(r, {0.0, 1.0}) == doctest::Approx(7.0).epsilon(1e-6));
}

TEST_CASE("optimize_min_curvature: straight corridor stays straight") {
  TrackCenterline track;
  track.closed = false;
  for (int i = 0; i < 20; ++i) {
    track.centers.push_back({0.5 * i, 0.0});
    track.half_width_left.push_back(1.0);
    track.half_width_right.push_back(1.0);
  }
  const MinCurvatureResult result = optimize_min_curvature(track);
  CHECK(result.objective <= 1e-8);
  for (double a : result.alpha.alpha) CHECK(std::abs(a) < 1e-6);
}

TEST_CASE("optimize_min_curvature: annulus pushes the path outward") {
  const TrackCenterline track = make_squiggle_centerline(5.0, 0.0, 1, 0.5, 0.4);
  // A circle of radius 5 with 0.5 m of room: the optimum uses the full width.
  const MinCurvatureResult result = optimize_min_curvature(track);
  CHECK(result.objective < result.initial_objective);
  CHECK(result.initial_objective ==
        doctest::Approx(min_curvature_objective(track, std::vector<double>(track.size(), 0.0)))
            .epsilon(1e-12));
  // Never worse than the alpha = 0 start.
  CHECK(result.objective <= result.objective_history.front() + 1e-12);
  CHECK(result.objective <=
        *std::min_element(result.objective_history.begin(), result.objective_history.end()) +
            1e-12);
  // All alphas inside the box.
  for (std::size_t i = 0; i < result.alpha.alpha.size(); ++i) {
    CHECK(result.alpha.alpha[i] >= -track.half_width_right[i] - 1e-12);
    CHECK(result.alpha.alpha[i] <= track.half_width_left[i] + 1e-12);
  }
}

TEST_CASE("optimize_min_curvature beats the exhaustive grid oracle on a small ring") {
  TrackCenterline track;
  track.closed = true;
  const int n = 8;
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * M_PI * i / n;
    track.centers.push_back({3.0 * std::cos(a), 3.0 * std::sin(a)});
    track.half_width_left.push_back(0.45);
    track.half_width_right.push_back(0.45);
  }
  const MinCurvatureResult result = optimize_min_curvature(track);

  const double grid[5] = {-0.4, -0.2, 0.0, 0.2, 0.4};
  std::vector<double> alpha(n, 0.0);
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> digit(n, 0);
  while (true) {
    for (int i = 0; i < n; ++i) alpha[static_cast<std::size_t>(i)] = grid[digit[i]];
    best = std::min(best, min_curvature_objective(track, alpha));
    int carry = 0;
    while (carry < n && ++digit[carry] == 5) digit[carry++] = 0;
    if (carry == n) break;
  }
  CHECK(result.objective <= best + 1e-6);
}

TEST_CASE("optimized raceline carries the speed law v = min(v_max, sqrt(a/|g|))") {
  const TrackCenterline track = make_oval_centerline(4.0, 1.5, 0.8, 0.2);
  MinCurvatureConfig cfg;
  cfg.v_max = 2.0;
  cfg.a_lat_max = 3.0;
  const MinCurvatureResult result = optimize_min_curvature(track, cfg);
  REQUIRE(result.raceline.size() == track.size());
  for (const Waypoint& w : result.raceline.waypoints) {
    const double expected =
        std::abs(w.gamma) > 1e-12 ? std::min(2.0, std::sqrt(3.0 / std::abs(w.gamma))) : 2.0;
    CHECK(w.v == doctest::Approx(expected).epsilon(1e-9));
  }
}
