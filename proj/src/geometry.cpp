#include "raceplan/geometry.hpp"

namespace raceplan {

double wrap_angle(double theta) {
  double r = std::fmod(theta + M_PI, 2.0 * M_PI);
  if (r <= 0.0) r += 2.0 * M_PI;
  return r - M_PI;
}

CartesianScan polar_to_cartesian(const PolarScan& scan) {
  CartesianScan out;
  out.points.reserve(scan.ranges.size());
  for (std::size_t i = 0; i < scan.ranges.size(); ++i) {
    const double angle = scan.angle_min + static_cast<double>(i) * scan.angle_increment;
    out.points.push_back({scan.ranges[i] * std::cos(angle), scan.ranges[i] * std::sin(angle)});
  }
  return out;
}

Point2D world_to_vehicle(const Pose2D& pose, const Point2D& point) {
  const double c = std::cos(pose.theta);
  const double s = std::sin(pose.theta);
  const double dx = point.x - pose.x;
  const double dy = point.y - pose.y;
  return {c * dx + s * dy, -s * dx + c * dy};
}

std::vector<Point2D> world_to_vehicle(const Pose2D& pose, const std::vector<Point2D>& points) {
  std::vector<Point2D> out;
  out.reserve(points.size());
  for (const Point2D& p : points) out.push_back(world_to_vehicle(pose, p));
  return out;
}

Point2D vehicle_to_world(const Pose2D& pose, const Point2D& point) {
  const double c = std::cos(pose.theta);
  const double s = std::sin(pose.theta);
  return {pose.x + c * point.x - s * point.y, pose.y + s * point.x + c * point.y};
}

std::vector<Point2D> vehicle_to_world(const Pose2D& pose, const std::vector<Point2D>& points) {
  std::vector<Point2D> out;
  out.reserve(points.size());
  for (const Point2D& p : points) out.push_back(vehicle_to_world(pose, p));
  return out;
}

}  // namespace raceplan
