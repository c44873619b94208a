#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace raceplan {

struct Point2D {
  double x = 0.0;
  double y = 0.0;
};

inline Point2D operator+(const Point2D& a, const Point2D& b) { return {a.x + b.x, a.y + b.y}; }
inline Point2D operator-(const Point2D& a, const Point2D& b) { return {a.x - b.x, a.y - b.y}; }
inline Point2D operator*(double s, const Point2D& p) { return {s * p.x, s * p.y}; }

inline double dot(const Point2D& a, const Point2D& b) { return a.x * b.x + a.y * b.y; }
inline double cross(const Point2D& a, const Point2D& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Point2D& p) { return std::hypot(p.x, p.y); }
inline double distance(const Point2D& a, const Point2D& b) { return std::hypot(a.x - b.x, a.y - b.y); }

// Wraps an angle into (-pi, pi]. Idempotent.
double wrap_angle(double theta);

// Planar pose. theta is kept in (-pi, pi] by the named constructor and by
// every operation in this module that writes it.
struct Pose2D {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  static Pose2D make(double x, double y, double theta) { return {x, y, wrap_angle(theta)}; }
};

// One 2D lidar sweep in polar form. Beam i points at
// angle_min + i * angle_increment in the vehicle frame.
struct PolarScan {
  double angle_min = 0.0;
  double angle_increment = 0.0;
  std::vector<double> ranges;

  std::size_t beam_count() const { return ranges.size(); }
};

struct CartesianScan {
  std::vector<Point2D> points;
};

// Polar scan to vehicle-frame Cartesian points. Length preserving.
CartesianScan polar_to_cartesian(const PolarScan& scan);

// Rigid transform of world points into the frame of `pose`:
// translate by (-x, -y), then rotate by -theta.
std::vector<Point2D> world_to_vehicle(const Pose2D& pose, const std::vector<Point2D>& points);
Point2D world_to_vehicle(const Pose2D& pose, const Point2D& point);

// Exact inverse of world_to_vehicle.
std::vector<Point2D> vehicle_to_world(const Pose2D& pose, const std::vector<Point2D>& points);
Point2D vehicle_to_world(const Pose2D& pose, const Point2D& point);

}  // namespace raceplan
