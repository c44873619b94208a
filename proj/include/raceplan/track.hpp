#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "raceplan/geometry.hpp"

namespace raceplan {

// Reference point: position, target speed, heading, signed curvature.
struct Waypoint {
  double x = 0.0;
  double y = 0.0;
  double v = 0.0;      // m/s, >= 0
  double theta = 0.0;  // rad, wrapped
  double gamma = 0.0;  // 1/m, >0 = left turn
};

struct Raceline {
  std::vector<Waypoint> waypoints;
  bool closed = true;

  std::size_t size() const { return waypoints.size(); }
  Point2D position(std::size_t i) const { return {waypoints[i].x, waypoints[i].y}; }
  // Total polyline length; includes the closing segment when closed.
  double perimeter() const;
};

// Centerline with per-point corridor half widths. w_left is measured along
// the left unit normal of the local heading, w_right along the right.
struct TrackCenterline {
  std::vector<Point2D> centers;
  std::vector<double> half_width_left;
  std::vector<double> half_width_right;
  bool closed = true;

  std::size_t size() const { return centers.size(); }
};

// Signed lateral displacement per centerline point, positive along the left
// normal, bounded by the corridor half widths.
struct AlphaVector {
  std::vector<double> alpha;
};

struct MinCurvatureConfig {
  int max_iterations = 4000;
  double gradient_tolerance = 1e-7;  // on the projected gradient norm
  double initial_step = 1.0;
  double v_max = 2.0;        // speed profile cap, m/s
  double a_lat_max = 3.0;    // lateral acceleration budget, m/s^2
  double boundary_margin = 0.0;  // shrink usable corridor by this much
};

struct MinCurvatureResult {
  AlphaVector alpha;
  Raceline raceline;
  double objective = 0.0;          // sum of squared curvatures at the solution
  double initial_objective = 0.0;  // same objective at alpha = 0
  int iterations = 0;
  std::vector<double> objective_history;
};

// --- waypoint IO (CSV, ';'-separated, '.' radix, LF) ---

Raceline load_waypoints(const std::string& path);
void save_waypoints(const Raceline& raceline, const std::string& path);
TrackCenterline load_centerline(const std::string& path);
void save_centerline(const TrackCenterline& track, const std::string& path);

// Validates the Raceline invariants (waypoint count, spacing, speeds);
// throws ValidationError naming the offending field/index.
void validate_raceline(const Raceline& raceline);

// --- geometry over waypoint sequences ---

// Index of the waypoint nearest to `position` plus its distance.
// Ties break toward the smaller index.
std::pair<std::size_t, double> closest_waypoint(const Raceline& raceline, const Point2D& position);

// `count` points evenly spaced by arc length along the piecewise-linear
// interpolant, starting at waypoint `start_index`. Wraps modulo the
// perimeter on closed tracks.
std::vector<Point2D> resample_by_arclength(const Raceline& raceline, std::size_t start_index,
                                           double length, int count);

// Same sampling, but interpolating the full waypoint tuple (v linearly,
// theta from the local segment direction, gamma linearly).
std::vector<Waypoint> resample_waypoints_by_arclength(const Raceline& raceline,
                                                      std::size_t start_index, double length,
                                                      int count);

// Discrete signed curvature (Menger circumradius over consecutive triples).
// Collinear triples give 0; endpoints of open curves copy their neighbor.
std::vector<double> curvature_profile(const std::vector<Point2D>& points, bool closed);

// Continuous arc-length progress of `position` projected onto the raceline,
// in [0, perimeter). Used for lap accounting.
double project_progress(const Raceline& raceline, const Point2D& position);

// --- minimum-curvature raceline ---

// Minimizes sum_i gamma_i^2 of the laterally displaced path c_i + alpha_i*n_i
// over box-bounded alpha via projected gradient descent with backtracking.
// The returned raceline carries recomputed headings, curvatures, and the
// speed profile v = min(v_max, sqrt(a_lat_max/|gamma|)).
MinCurvatureResult optimize_min_curvature(const TrackCenterline& track,
                                          const MinCurvatureConfig& config = {});

// Objective of Eq-style sum of squared curvatures for a displaced path.
double min_curvature_objective(const TrackCenterline& track, const std::vector<double>& alpha);

// Left unit normals of the centerline (central differences, wrapping when closed).
std::vector<Point2D> centerline_normals(const TrackCenterline& track);

// Rebuilds waypoint headings/curvatures/speeds from raw points.
Raceline raceline_from_points(const std::vector<Point2D>& points, bool closed, double v_max,
                              double a_lat_max);

// --- bundled synthetic tracks ---

// Stadium-shaped centerline: two straights joined by semicircles.
TrackCenterline make_oval_centerline(double straight_length = 6.0, double radius = 2.0,
                                     double half_width = 1.1, double spacing = 0.1);

// Closed wavy loop: radius modulated by a sinusoid.
TrackCenterline make_squiggle_centerline(double base_radius = 3.5, double amplitude = 0.9,
                                         int lobes = 3, double half_width = 1.0,
                                         double spacing = 0.1);

}  // namespace raceplan
