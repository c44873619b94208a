#include "raceplan/track.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "raceplan/csv.hpp"
#include "raceplan/error.hpp"

namespace raceplan {

namespace {

constexpr double kMinSpacing = 1e-6;  // consecutive waypoints must be farther apart

// Segment count of the polyline: closed tracks include the closing segment.
std::size_t segment_count(std::size_t n, bool closed) { return closed ? n : n - 1; }

}  // namespace

double Raceline::perimeter() const {
  const std::size_t n = waypoints.size();
  if (n < 2) return 0.0;
  double total = 0.0;
  for (std::size_t s = 0; s < segment_count(n, closed); ++s) {
    total += distance(position(s), position((s + 1) % n));
  }
  return total;
}

void validate_raceline(const Raceline& raceline) {
  const std::size_t n = raceline.size();
  if (raceline.closed && n < 3) {
    throw ValidationError("raceline: closed track needs at least 3 waypoints, got " +
                          std::to_string(n));
  }
  if (!raceline.closed && n < 2) {
    throw ValidationError("raceline: open track needs at least 2 waypoints, got " +
                          std::to_string(n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Waypoint& w = raceline.waypoints[i];
    if (!(std::isfinite(w.x) && std::isfinite(w.y) && std::isfinite(w.v) &&
          std::isfinite(w.theta) && std::isfinite(w.gamma))) {
      throw ValidationError("raceline: non-finite waypoint at index " + std::to_string(i));
    }
    if (w.v < 0.0) {
      throw ValidationError("raceline: field v must be >= 0, got " + std::to_string(w.v) +
                            " at index " + std::to_string(i));
    }
  }
  for (std::size_t s = 0; s < segment_count(n, raceline.closed); ++s) {
    if (distance(raceline.position(s), raceline.position((s + 1) % n)) <= kMinSpacing) {
      throw ValidationError("raceline: waypoints " + std::to_string(s) + " and " +
                            std::to_string((s + 1) % n) + " are closer than minimum spacing");
    }
  }
}

Raceline load_waypoints(const std::string& path) {
  const csv::Table table = csv::read(path);
  const std::size_t cx = table.column("x");
  const std::size_t cy = table.column("y");
  const std::size_t cv = table.column("v");
  const std::size_t ct = table.column("theta");
  const std::size_t cg = table.column("gamma");

  Raceline raceline;
  raceline.closed = true;
  raceline.waypoints.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    Waypoint w;
    w.x = row[cx];
    w.y = row[cy];
    w.v = row[cv];
    w.theta = wrap_angle(row[ct]);
    w.gamma = row[cg];
    raceline.waypoints.push_back(w);
  }
  validate_raceline(raceline);
  return raceline;
}

void save_waypoints(const Raceline& raceline, const std::string& path) {
  csv::Table table;
  table.header = {"x", "y", "v", "theta", "gamma"};
  for (const Waypoint& w : raceline.waypoints) {
    table.rows.push_back({w.x, w.y, w.v, w.theta, w.gamma});
  }
  csv::write(path, table);
}

TrackCenterline load_centerline(const std::string& path) {
  const csv::Table table = csv::read(path);
  const std::size_t cx = table.column("x");
  const std::size_t cy = table.column("y");
  const std::size_t cl = table.column("w_left");
  const std::size_t cr = table.column("w_right");

  TrackCenterline track;
  track.closed = true;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    if (row[cl] <= 0.0 || row[cr] <= 0.0) {
      throw ValidationError(path + ": half widths must be positive (row " + std::to_string(i) +
                            ")");
    }
    track.centers.push_back({row[cx], row[cy]});
    track.half_width_left.push_back(row[cl]);
    track.half_width_right.push_back(row[cr]);
  }
  if (track.size() < 3) {
    throw ValidationError(path + ": centerline needs at least 3 points");
  }
  return track;
}

void save_centerline(const TrackCenterline& track, const std::string& path) {
  csv::Table table;
  table.header = {"x", "y", "w_left", "w_right"};
  for (std::size_t i = 0; i < track.size(); ++i) {
    table.rows.push_back(
        {track.centers[i].x, track.centers[i].y, track.half_width_left[i],
         track.half_width_right[i]});
  }
  csv::write(path, table);
}

std::pair<std::size_t, double> closest_waypoint(const Raceline& raceline,
                                                const Point2D& position) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < raceline.size(); ++i) {
    const double d = distance(raceline.position(i), position);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return {best, best_d};
}

namespace {

// Cumulative arc lengths walking the polyline from start_index.
// cum[k] = distance along the line to the k-th point after the start.
std::vector<double> cumulative_from(const Raceline& raceline, std::size_t start_index) {
  const std::size_t n = raceline.size();
  const std::size_t segs = segment_count(n, raceline.closed);
  std::vector<double> cum(segs + 1, 0.0);
  for (std::size_t k = 0; k < segs; ++k) {
    const std::size_t a = (start_index + k) % n;
    const std::size_t b = (start_index + k + 1) % n;
    cum[k + 1] = cum[k] + distance(raceline.position(a), raceline.position(b));
  }
  return cum;
}

struct ArcSample {
  std::size_t seg;  // segment index counted from start_index
  double t;         // [0, 1] position within the segment
};

ArcSample locate_arc(const std::vector<double>& cum, double s, bool closed) {
  const double total = cum.back();
  if (closed) {
    s = std::fmod(s, total);
    if (s < 0.0) s += total;
  } else {
    s = std::clamp(s, 0.0, total);
  }
  // First segment whose end lies at or past s.
  const auto it = std::lower_bound(cum.begin() + 1, cum.end(), s);
  const std::size_t seg = static_cast<std::size_t>(it - cum.begin()) - 1;
  const double seg_len = cum[seg + 1] - cum[seg];
  const double t = seg_len > 0.0 ? (s - cum[seg]) / seg_len : 0.0;
  return {seg, t};
}

}  // namespace

std::vector<Point2D> resample_by_arclength(const Raceline& raceline, std::size_t start_index,
                                           double length, int count) {
  if (length <= 0.0) throw ValidationError("resample_by_arclength: length must be positive");
  if (count < 2) throw ValidationError("resample_by_arclength: count must be >= 2");
  const std::size_t n = raceline.size();
  const auto cum = cumulative_from(raceline, start_index);

  std::vector<Point2D> out;
  out.reserve(static_cast<std::size_t>(count));
  const double step = length / static_cast<double>(count - 1);
  for (int j = 0; j < count; ++j) {
    const ArcSample at = locate_arc(cum, step * j, raceline.closed);
    const Point2D a = raceline.position((start_index + at.seg) % n);
    const Point2D b = raceline.position((start_index + at.seg + 1) % n);
    out.push_back(a + at.t * (b - a));
  }
  return out;
}

std::vector<Waypoint> resample_waypoints_by_arclength(const Raceline& raceline,
                                                      std::size_t start_index, double length,
                                                      int count) {
  if (length <= 0.0) throw ValidationError("resample_by_arclength: length must be positive");
  if (count < 2) throw ValidationError("resample_by_arclength: count must be >= 2");
  const std::size_t n = raceline.size();
  const auto cum = cumulative_from(raceline, start_index);

  std::vector<Waypoint> out;
  out.reserve(static_cast<std::size_t>(count));
  const double step = length / static_cast<double>(count - 1);
  for (int j = 0; j < count; ++j) {
    const ArcSample at = locate_arc(cum, step * j, raceline.closed);
    const Waypoint& wa = raceline.waypoints[(start_index + at.seg) % n];
    const Waypoint& wb = raceline.waypoints[(start_index + at.seg + 1) % n];
    Waypoint w;
    w.x = wa.x + at.t * (wb.x - wa.x);
    w.y = wa.y + at.t * (wb.y - wa.y);
    w.v = wa.v + at.t * (wb.v - wa.v);
    w.gamma = wa.gamma + at.t * (wb.gamma - wa.gamma);
    w.theta = std::atan2(wb.y - wa.y, wb.x - wa.x);
    out.push_back(w);
  }
  return out;
}

namespace {

// Signed Menger curvature of the triple (a, b, c); 0 when collinear.
double menger_curvature(const Point2D& a, const Point2D& b, const Point2D& c) {
  const Point2D ab = b - a;
  const Point2D bc = c - b;
  const double twice_area = cross(ab, bc);
  const double denom = norm(ab) * norm(bc) * distance(a, c);
  if (denom < 1e-300) return 0.0;
  return 2.0 * twice_area / denom;
}

double curvature_at(const std::vector<Point2D>& pts, bool closed, std::size_t i) {
  const std::size_t n = pts.size();
  if (closed) {
    return menger_curvature(pts[(i + n - 1) % n], pts[i], pts[(i + 1) % n]);
  }
  // Interior points only; callers copy values onto the open endpoints.
  return menger_curvature(pts[i - 1], pts[i], pts[i + 1]);
}

}  // namespace

std::vector<double> curvature_profile(const std::vector<Point2D>& points, bool closed) {
  const std::size_t n = points.size();
  if (n < 3) throw ValidationError("curvature_profile: need at least 3 points");
  std::vector<double> gamma(n, 0.0);
  if (closed) {
    for (std::size_t i = 0; i < n; ++i) gamma[i] = curvature_at(points, true, i);
  } else {
    for (std::size_t i = 1; i + 1 < n; ++i) gamma[i] = curvature_at(points, false, i);
    gamma[0] = gamma[1];
    gamma[n - 1] = gamma[n - 2];
  }
  return gamma;
}

double project_progress(const Raceline& raceline, const Point2D& position) {
  const std::size_t n = raceline.size();
  const auto cum = cumulative_from(raceline, 0);
  double best_d2 = std::numeric_limits<double>::infinity();
  double best_s = 0.0;
  for (std::size_t s = 0; s < segment_count(n, raceline.closed); ++s) {
    const Point2D a = raceline.position(s);
    const Point2D b = raceline.position((s + 1) % n);
    const Point2D ab = b - a;
    const double len2 = dot(ab, ab);
    double t = len2 > 0.0 ? dot(position - a, ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const Point2D p = a + t * ab;
    const double d2 = dot(position - p, position - p);
    if (d2 < best_d2) {
      best_d2 = d2;
      best_s = cum[s] + t * (cum[s + 1] - cum[s]);
    }
  }
  const double total = cum.back();
  return (raceline.closed && best_s >= total) ? best_s - total : best_s;
}

std::vector<Point2D> centerline_normals(const TrackCenterline& track) {
  const std::size_t n = track.size();
  std::vector<Point2D> normals(n);
  for (std::size_t i = 0; i < n; ++i) {
    Point2D tangent;
    if (track.closed) {
      tangent = track.centers[(i + 1) % n] - track.centers[(i + n - 1) % n];
    } else if (i == 0) {
      tangent = track.centers[1] - track.centers[0];
    } else if (i + 1 == n) {
      tangent = track.centers[n - 1] - track.centers[n - 2];
    } else {
      tangent = track.centers[i + 1] - track.centers[i - 1];
    }
    const double len = norm(tangent);
    if (len < 1e-12) throw ValidationError("centerline: cusp at index " + std::to_string(i));
    normals[i] = {-tangent.y / len, tangent.x / len};  // left normal
  }
  return normals;
}

namespace {

std::vector<Point2D> displaced_path(const TrackCenterline& track,
                                    const std::vector<Point2D>& normals,
                                    const std::vector<double>& alpha) {
  std::vector<Point2D> pts(track.size());
  for (std::size_t i = 0; i < track.size(); ++i) {
    pts[i] = track.centers[i] + alpha[i] * normals[i];
  }
  return pts;
}

// Indices whose curvature depends on point j (the FD window for one alpha
// coordinate). Open-curve endpoints copy their neighbours, so index 0 follows
// 1 and n-1 follows n-2.
std::vector<std::size_t> curvature_window(std::size_t j, std::size_t n, bool closed) {
  std::vector<std::size_t> idx;
  if (closed) {
    idx = {(j + n - 1) % n, j, (j + 1) % n};
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    return idx;
  }
  for (std::size_t i = (j >= 1 ? j - 1 : 1); i <= j + 1 && i + 1 < n; ++i) {
    if (i >= 1) idx.push_back(i);
  }
  if (std::find(idx.begin(), idx.end(), 1u) != idx.end()) idx.push_back(0);
  if (n >= 2 && std::find(idx.begin(), idx.end(), n - 2) != idx.end()) idx.push_back(n - 1);
  return idx;
}

double window_objective(const std::vector<Point2D>& pts, bool closed,
                        const std::vector<std::size_t>& window) {
  const std::size_t n = pts.size();
  double sum = 0.0;
  for (std::size_t i : window) {
    double k;
    if (closed) {
      k = curvature_at(pts, true, i);
    } else if (i == 0) {
      k = curvature_at(pts, false, 1);
    } else if (i + 1 == n) {
      k = curvature_at(pts, false, n - 2);
    } else {
      k = curvature_at(pts, false, i);
    }
    sum += k * k;
  }
  return sum;
}

}  // namespace

double min_curvature_objective(const TrackCenterline& track, const std::vector<double>& alpha) {
  const auto normals = centerline_normals(track);
  const auto pts = displaced_path(track, normals, alpha);
  const auto gamma = curvature_profile(pts, track.closed);
  double sum = 0.0;
  for (double g : gamma) sum += g * g;
  return sum;
}

Raceline raceline_from_points(const std::vector<Point2D>& points, bool closed, double v_max,
                              double a_lat_max) {
  const std::size_t n = points.size();
  const auto gamma = curvature_profile(points, closed);
  Raceline raceline;
  raceline.closed = closed;
  raceline.waypoints.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Point2D tangent;
    if (closed) {
      tangent = points[(i + 1) % n] - points[(i + n - 1) % n];
    } else if (i == 0) {
      tangent = points[1] - points[0];
    } else if (i + 1 == n) {
      tangent = points[n - 1] - points[n - 2];
    } else {
      tangent = points[i + 1] - points[i - 1];
    }
    Waypoint& w = raceline.waypoints[i];
    w.x = points[i].x;
    w.y = points[i].y;
    w.theta = std::atan2(tangent.y, tangent.x);
    w.gamma = gamma[i];
    w.v = std::abs(gamma[i]) > 1e-12 ? std::min(v_max, std::sqrt(a_lat_max / std::abs(gamma[i])))
                                     : v_max;
  }
  return raceline;
}

MinCurvatureResult optimize_min_curvature(const TrackCenterline& track,
                                          const MinCurvatureConfig& config) {
  const std::size_t n = track.size();
  if (n < 3) throw ValidationError("optimize_min_curvature: centerline needs >= 3 points");
  const auto normals = centerline_normals(track);

  std::vector<double> lo(n), hi(n);
  for (std::size_t i = 0; i < n; ++i) {
    hi[i] = track.half_width_left[i] - config.boundary_margin;
    lo[i] = -(track.half_width_right[i] - config.boundary_margin);
    if (lo[i] > hi[i]) throw ValidationError("optimize_min_curvature: margin exceeds corridor");
  }

  std::vector<double> alpha(n, 0.0);
  auto pts = displaced_path(track, normals, alpha);
  auto full_objective = [&](const std::vector<Point2D>& p) {
    const auto gamma = curvature_profile(p, track.closed);
    double sum = 0.0;
    for (double g : gamma) sum += g * g;
    return sum;
  };

  double f = full_objective(pts);
  const double f0 = f;
  std::vector<double> history{f};

  // Central-difference gradient; each alpha_j only moves curvatures in a
  // three-point window, so one gradient costs O(n) curvature evaluations.
  std::vector<double> grad(n, 0.0);
  auto compute_gradient = [&]() {
    for (std::size_t j = 0; j < n; ++j) {
      const auto window = curvature_window(j, n, track.closed);
      const double h = 1e-6 * std::max(1.0, std::abs(alpha[j]));
      const Point2D saved = pts[j];
      pts[j] = track.centers[j] + (alpha[j] + h) * normals[j];
      const double fp = window_objective(pts, track.closed, window);
      pts[j] = track.centers[j] + (alpha[j] - h) * normals[j];
      const double fm = window_objective(pts, track.closed, window);
      pts[j] = saved;
      grad[j] = (fp - fm) / (2.0 * h);
    }
  };

  // Spectral projected gradient: Barzilai-Borwein step lengths tame the
  // stiff bending modes of the curvature objective; the nonmonotone (GLL)
  // acceptance rule lets BB steps through while the running maximum still
  // decreases, so the final objective never exceeds the alpha = 0 start.
  double step = config.initial_step;
  std::vector<double> prev_alpha, prev_grad;
  std::vector<double> recent_f{f};
  std::vector<double> best_alpha = alpha;
  double best_f = f;
  double window_anchor = f;
  int iter = 0;
  bool stalled = false;
  for (; iter < config.max_iterations; ++iter) {
    compute_gradient();

    // Projected-gradient stationarity measure.
    double pg_norm2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double moved = std::clamp(alpha[i] - grad[i], lo[i], hi[i]) - alpha[i];
      pg_norm2 += moved * moved;
    }
    if (std::sqrt(pg_norm2) <= config.gradient_tolerance) break;

    if (!prev_alpha.empty()) {
      double ss = 0.0, sy = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double s = alpha[i] - prev_alpha[i];
        const double y = grad[i] - prev_grad[i];
        ss += s * s;
        sy += s * y;
      }
      step = sy > 1e-16 ? std::clamp(ss / sy, 1e-10, 1e10) : step * 2.0;
    }
    prev_alpha = alpha;
    prev_grad = grad;

    const double f_ref = *std::max_element(recent_f.begin(), recent_f.end());
    bool accepted = false;
    std::vector<double> candidate(n);
    while (step > 1e-16) {
      double descent = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        candidate[i] = std::clamp(alpha[i] - step * grad[i], lo[i], hi[i]);
        descent += grad[i] * (candidate[i] - alpha[i]);
      }
      const auto cand_pts = displaced_path(track, normals, candidate);
      const double f_new = full_objective(cand_pts);
      if (f_new <= f_ref + 1e-4 * descent) {
        alpha = candidate;
        pts = cand_pts;
        f = f_new;
        accepted = true;
        recent_f.push_back(f);
        if (recent_f.size() > 10) recent_f.erase(recent_f.begin());
        if (f < best_f) {
          best_f = f;
          best_alpha = alpha;
        }
        break;
      }
      step *= 0.5;
    }
    history.push_back(f);
    if (!accepted) break;  // no descent step left at any length
    // Finite-difference gradients bound the attainable stationarity; treat a
    // flat 50-iteration window as converged.
    if ((iter + 1) % 50 == 0) {
      if (best_f > window_anchor - 1e-9 * (1.0 + std::abs(best_f))) {
        stalled = true;
        break;
      }
      window_anchor = best_f;
    }
  }

  if (iter >= config.max_iterations && !stalled) {
    throw SolverError("optimize_min_curvature: no convergence after " +
                          std::to_string(config.max_iterations) + " iterations (objective " +
                          std::to_string(best_f) + ")",
                      history);
  }

  // Nonmonotone acceptance: return the best iterate seen, not the last.
  MinCurvatureResult result;
  result.alpha.alpha = best_alpha;
  result.objective = best_f;
  result.initial_objective = f0;
  result.iterations = iter;
  result.objective_history = std::move(history);
  result.raceline = raceline_from_points(displaced_path(track, normals, best_alpha),
                                         track.closed, config.v_max, config.a_lat_max);
  return result;
}

TrackCenterline make_oval_centerline(double straight_length, double radius, double half_width,
                                     double spacing) {
  const double perimeter = 2.0 * straight_length + 2.0 * M_PI * radius;
  const int n = std::max(12, static_cast<int>(std::lround(perimeter / spacing)));
  const double ds = perimeter / n;

  TrackCenterline track;
  track.closed = true;
  const double hl = straight_length / 2.0;
  for (int i = 0; i < n; ++i) {
    const double s = i * ds;
    Point2D p;
    if (s < straight_length) {  // bottom straight, heading +x
      p = {-hl + s, -radius};
    } else if (s < straight_length + M_PI * radius) {  // right semicircle
      const double a = (s - straight_length) / radius - M_PI / 2.0;
      p = {hl + radius * std::cos(a), radius * std::sin(a)};
    } else if (s < 2.0 * straight_length + M_PI * radius) {  // top straight, heading -x
      const double d = s - straight_length - M_PI * radius;
      p = {hl - d, radius};
    } else {  // left semicircle
      const double a = (s - 2.0 * straight_length - M_PI * radius) / radius + M_PI / 2.0;
      p = {-hl + radius * std::cos(a), radius * std::sin(a)};
    }
    track.centers.push_back(p);
    track.half_width_left.push_back(half_width);
    track.half_width_right.push_back(half_width);
  }
  return track;
}

TrackCenterline make_squiggle_centerline(double base_radius, double amplitude, int lobes,
                                         double half_width, double spacing) {
  const double approx_perimeter = 2.0 * M_PI * base_radius;
  const int n = std::max(24, static_cast<int>(std::lround(approx_perimeter / spacing)));

  TrackCenterline track;
  track.closed = true;
  for (int i = 0; i < n; ++i) {
    const double phi = 2.0 * M_PI * i / n;
    const double r = base_radius + amplitude * std::sin(lobes * phi);
    track.centers.push_back({r * std::cos(phi), r * std::sin(phi)});
    track.half_width_left.push_back(half_width);
    track.half_width_right.push_back(half_width);
  }
  return track;
}

}  // namespace raceplan
