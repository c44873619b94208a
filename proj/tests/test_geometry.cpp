#include <doctest.h>

#include <cmath>

#include "raceplan/geometry.hpp"
#include "raceplan/rng.hpp"

using namespace raceplan;

TEST_CASE("wrap_angle lands in (-pi, pi] and is idempotent") {
  CHECK(wrap_angle(M_PI) == doctest::Approx(M_PI));
  CHECK(wrap_angle(-M_PI) == doctest::Approx(M_PI));
  CHECK(wrap_angle(3.0 * M_PI) == doctest::Approx(M_PI));
  CHECK(wrap_angle(0.0) == doctest::Approx(0.0));
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const double theta = rng.uniform(-50.0, 50.0);
    const double w = wrap_angle(theta);
    CHECK(w > -M_PI);
    CHECK(w <= M_PI);
    CHECK(wrap_angle(w) == doctest::Approx(w).epsilon(1e-15));
    // Same direction as the original angle.
    CHECK(std::cos(w - theta) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("polar_to_cartesian axis-aligned and unit-circle beams") {
  PolarScan one;
  one.angle_min = 0.0;
  one.angle_increment = 0.0;
  one.ranges = {2.0};
  const CartesianScan c1 = polar_to_cartesian(one);
  REQUIRE(c1.points.size() == 1);
  CHECK(c1.points[0].x == doctest::Approx(2.0));
  CHECK(c1.points[0].y == doctest::Approx(0.0));

  PolarScan four;
  four.angle_min = 0.0;
  four.angle_increment = M_PI / 2.0;
  four.ranges = {1.0, 1.0, 1.0, 1.0};
  const CartesianScan c4 = polar_to_cartesian(four);
  const Point2D expected[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  for (int i = 0; i < 4; ++i) {
    CHECK(c4.points[i].x == doctest::Approx(expected[i].x).epsilon(1e-12));
    CHECK(c4.points[i].y == doctest::Approx(expected[i].y).epsilon(1e-12));
  }
}

TEST_CASE("polar_to_cartesian hand trigonometry case") {
  // Beam at pi/6 with range 2 lands at (sqrt(3), 1).
  PolarScan scan;
  scan.angle_min = M_PI / 6.0;
  scan.angle_increment = 0.0;
  scan.ranges = {2.0};
  const CartesianScan c = polar_to_cartesian(scan);
  CHECK(c.points[0].x == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));
  CHECK(c.points[0].y == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("polar_to_cartesian preserves per-point norm") {
  Rng rng(3);
  PolarScan scan;
  scan.angle_min = -2.35;
  scan.angle_increment = 4.7 / 107.0;
  for (int i = 0; i < 108; ++i) scan.ranges.push_back(rng.uniform(0.0, 10.0));
  const CartesianScan c = polar_to_cartesian(scan);
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    CHECK(norm(c.points[i]) ==
          doctest::Approx(scan.ranges[i]).epsilon(1e-12));
  }
}

TEST_CASE("world_to_vehicle identity, translation, rotation") {
  const std::vector<Point2D> pts{{2.0, 0.0}, {0.0, 3.0}, {-1.5, 0.25}};

  const auto same = world_to_vehicle(Pose2D{0, 0, 0}, pts);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(same[i].x == doctest::Approx(pts[i].x));
    CHECK(same[i].y == doctest::Approx(pts[i].y));
  }

  const Point2D translated = world_to_vehicle(Pose2D{1, 0, 0}, Point2D{2, 0});
  CHECK(translated.x == doctest::Approx(1.0));
  CHECK(translated.y == doctest::Approx(0.0));

  const Point2D rotated = world_to_vehicle(Pose2D{0, 0, M_PI / 2.0}, Point2D{0, 3});
  CHECK(rotated.x == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(rotated.y == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("vehicle_to_world maps the origin to the pose and inverts rotation") {
  const Point2D origin = vehicle_to_world(Pose2D{1, 2, 0}, Point2D{0, 0});
  CHECK(origin.x == doctest::Approx(1.0));
  CHECK(origin.y == doctest::Approx(2.0));

  const Point2D diag = vehicle_to_world(Pose2D{0, 0, M_PI / 4.0}, Point2D{std::sqrt(2.0), 0});
  CHECK(diag.x == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(diag.y == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("world<->vehicle round trip and distance preservation") {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const Pose2D pose = Pose2D::make(rng.uniform(-20, 20), rng.uniform(-20, 20),
                                     rng.uniform(-10, 10));
    std::vector<Point2D> pts;
    for (int i = 0; i < 10; ++i) pts.push_back({rng.uniform(-20, 20), rng.uniform(-20, 20)});

    const auto local = world_to_vehicle(pose, pts);
    const auto back = vehicle_to_world(pose, local);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      CHECK(std::abs(back[i].x - pts[i].x) < 1e-9);
      CHECK(std::abs(back[i].y - pts[i].y) < 1e-9);
    }
    for (std::size_t i = 1; i < pts.size(); ++i) {
      CHECK(distance(local[i], local[0]) ==
            doctest::Approx(distance(pts[i], pts[0])).epsilon(1e-12));
    }
  }
}
