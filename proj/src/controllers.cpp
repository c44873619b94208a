#include "raceplan/controllers.hpp"

#include <algorithm>
#include <cmath>

#include "raceplan/error.hpp"
#include "raceplan/track.hpp"

namespace raceplan {

Action pure_pursuit_control(const VehicleState& state, const std::vector<Point2D>& trajectory,
                            const PurePursuitConfig& cfg, const VehicleParams& params) {
  if (trajectory.empty()) throw ValidationError("pure_pursuit_control: empty trajectory");

  const Point2D rear{state.x, state.y};
  std::size_t closest = 0;
  double closest_d = distance(trajectory[0], rear);
  for (std::size_t i = 1; i < trajectory.size(); ++i) {
    const double d = distance(trajectory[i], rear);
    if (d < closest_d) {
      closest_d = d;
      closest = i;
    }
  }

  // Walk forward to the first point at or past the lookahead distance.
  Point2D target = trajectory.back();
  double lookahead = distance(target, rear);
  for (std::size_t i = closest; i < trajectory.size(); ++i) {
    const double d = distance(trajectory[i], rear);
    if (d >= cfg.lookahead) {
      target = trajectory[i];
      lookahead = cfg.lookahead;
      if (i > closest) {
        // Interpolate on the bracketing segment: |a + t(b-a) - rear| = L.
        const Point2D a = trajectory[i - 1];
        const Point2D ab = trajectory[i] - a;
        const Point2D ar = a - rear;
        const double qa = dot(ab, ab);
        const double qb = 2.0 * dot(ar, ab);
        const double qc = dot(ar, ar) - cfg.lookahead * cfg.lookahead;
        const double disc = qb * qb - 4.0 * qa * qc;
        if (qa > 0.0 && disc >= 0.0) {
          const double t = (-qb + std::sqrt(disc)) / (2.0 * qa);
          if (t >= 0.0 && t <= 1.0) target = a + t * ab;
        }
      }
      break;
    }
  }
  // If every point is nearer than the lookahead, `target` stays the final
  // point and its actual distance feeds the curvature formula.

  const Point2D local = world_to_vehicle(state.pose(), target);
  const double e = local.y;
  const double denom = std::max(lookahead, 1e-9);
  const double gamma = 2.0 * std::abs(e) / (denom * denom);
  const double delta = std::copysign(std::atan(gamma * params.wheelbase), e);

  Action action;
  action.delta_des = std::clamp(delta, -params.delta_max, params.delta_max);
  action.v_des = cfg.speed;
  return action;
}

LinearDynamics linearize_dynamics(const Eigen::Vector4d& ref_state,
                                  const Eigen::Vector2d& ref_input,
                                  const VehicleParams& params, double dt) {
  const double v = ref_state[2];
  const double theta = ref_state[3];
  const double delta = ref_input[1];
  const double cos_t = std::cos(theta);
  const double sin_t = std::sin(theta);
  const double cos_d = std::cos(delta);

  Eigen::Matrix4d jz = Eigen::Matrix4d::Zero();
  jz(0, 2) = cos_t;
  jz(0, 3) = -v * sin_t;
  jz(1, 2) = sin_t;
  jz(1, 3) = v * cos_t;
  jz(3, 2) = std::tan(delta) / params.wheelbase;

  Eigen::Matrix<double, 4, 2> ju = Eigen::Matrix<double, 4, 2>::Zero();
  ju(2, 0) = 1.0;
  ju(3, 1) = v / (params.wheelbase * cos_d * cos_d);

  Eigen::Vector4d f;
  f << v * cos_t, v * sin_t, ref_input[0], v * std::tan(delta) / params.wheelbase;

  LinearDynamics lin;
  lin.A = Eigen::Matrix4d::Identity() + dt * jz;
  lin.B = dt * ju;
  lin.C = dt * (f - jz * ref_state - ju * ref_input);
  return lin;
}

std::vector<MpcReferencePoint> build_mpc_reference(const std::vector<Point2D>& points,
                                                   const std::vector<double>& speeds,
                                                   const VehicleParams& params,
                                                   const MpcConfig& cfg) {
  const std::size_t n = points.size();
  if (n < 2 || speeds.size() != n) {
    throw ValidationError("build_mpc_reference: need >= 2 points with matching speeds");
  }
  const std::vector<double> gamma =
      n >= 3 ? curvature_profile(points, false) : std::vector<double>(n, 0.0);

  std::vector<MpcReferencePoint> ref(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = std::min(i, n - 2);
    const Point2D dir = points[j + 1] - points[j];
    const double heading = std::atan2(dir.y, dir.x);
    const double v = std::clamp(speeds[i], cfg.z_min[2], cfg.z_max[2]);
    ref[i].z << points[i].x, points[i].y, v, heading;

    const double v_next = i + 1 < n ? std::clamp(speeds[i + 1], cfg.z_min[2], cfg.z_max[2]) : v;
    const double a = i + 1 < n ? (v_next - v) / cfg.dt : 0.0;
    const double delta = std::atan(params.wheelbase * gamma[i]);
    ref[i].u << std::clamp(a, cfg.u_min[0], cfg.u_max[0]),
        std::clamp(delta, cfg.u_min[1], cfg.u_max[1]);
  }
  return ref;
}

namespace {

// Variable layout: [z_0..z_H | u_0..u_{H-1} | d_0..d_{H-2}], d_t = u_{t+1}-u_t.
struct MpcLayout {
  int horizon;
  int z_off(int t) const { return 4 * t; }
  int u_off(int t) const { return 4 * (horizon + 1) + 2 * t; }
  int d_off(int t) const { return 4 * (horizon + 1) + 2 * horizon + 2 * t; }
  int n_vars() const { return 4 * (horizon + 1) + 2 * horizon + 2 * std::max(0, horizon - 1); }
  int n_eq() const { return 4 + 4 * horizon + 2 * std::max(0, horizon - 1); }
};

}  // namespace

MpcSolution solve_mpc(const VehicleState& state,
                      const std::vector<MpcReferencePoint>& ref_trajectory,
                      const MpcConfig& cfg, const VehicleParams& params,
                      const std::optional<Eigen::VectorXd>& warm_start,
                      Eigen::VectorXd* warm_start_out) {
  const int H = cfg.horizon;
  if (H < 1) throw ValidationError("solve_mpc: horizon must be >= 1");
  if (static_cast<int>(ref_trajectory.size()) != H + 1) {
    throw ValidationError("solve_mpc: reference length " +
                          std::to_string(ref_trajectory.size()) + " != horizon+1 = " +
                          std::to_string(H + 1));
  }

  Eigen::Vector4d z_cur;
  z_cur << state.x, state.y, state.v, state.theta;
  for (int i = 0; i < 4; ++i) {
    if (z_cur[i] < cfg.z_min[i] - 1e-9 || z_cur[i] > cfg.z_max[i] + 1e-9) {
      throw SolverError("solve_mpc: infeasible, current state component " + std::to_string(i) +
                        " = " + std::to_string(z_cur[i]) + " violates state bounds");
    }
  }

  // Unwrap reference headings to stay continuous and near the current one.
  std::vector<MpcReferencePoint> ref = ref_trajectory;
  double prev = z_cur[3];
  for (auto& r : ref) {
    r.z[3] = prev + wrap_angle(r.z[3] - prev);
    prev = r.z[3];
  }

  const MpcLayout lay{H};
  const int n = lay.n_vars();
  const int m = lay.n_eq();

  QpProblem qp;
  qp.P = Eigen::MatrixXd::Zero(n, n);
  qp.q = Eigen::VectorXd::Zero(n);
  qp.E = Eigen::MatrixXd::Zero(m, n);
  qp.e = Eigen::VectorXd::Zero(m);
  qp.lo = Eigen::VectorXd::Constant(n, -kQpInf);
  qp.hi = Eigen::VectorXd::Constant(n, kQpInf);

  // Quadratic costs: Eq-style (w - w_r)' W (w - w_r) maps to P = 2W, q = -2W w_r.
  for (int t = 0; t <= H; ++t) {
    const Eigen::Vector4d& w = t == H ? cfg.q_final : cfg.q_step;
    for (int i = 0; i < 4; ++i) {
      qp.P(lay.z_off(t) + i, lay.z_off(t) + i) = 2.0 * w[i];
      qp.q[lay.z_off(t) + i] = -2.0 * w[i] * ref[t].z[i];
    }
  }
  for (int t = 0; t < H; ++t) {
    for (int i = 0; i < 2; ++i) {
      qp.P(lay.u_off(t) + i, lay.u_off(t) + i) = 2.0 * cfg.r_step[i];
      qp.q[lay.u_off(t) + i] = -2.0 * cfg.r_step[i] * ref[t].u[i];
    }
  }
  for (int t = 0; t + 1 < H; ++t) {
    for (int i = 0; i < 2; ++i) {
      qp.P(lay.d_off(t) + i, lay.d_off(t) + i) = 2.0 * cfg.r_diff[i];
    }
  }

  // Bounds.
  for (int t = 0; t <= H; ++t) {
    for (int i = 0; i < 4; ++i) {
      qp.lo[lay.z_off(t) + i] = cfg.z_min[i];
      qp.hi[lay.z_off(t) + i] = cfg.z_max[i];
    }
  }
  for (int t = 0; t < H; ++t) {
    for (int i = 0; i < 2; ++i) {
      qp.lo[lay.u_off(t) + i] = cfg.u_min[i];
      qp.hi[lay.u_off(t) + i] = cfg.u_max[i];
    }
  }
  for (int t = 0; t + 1 < H; ++t) {
    for (int i = 0; i < 2; ++i) {
      qp.lo[lay.d_off(t) + i] = cfg.du_min[i] * cfg.dt;
      qp.hi[lay.d_off(t) + i] = cfg.du_max[i] * cfg.dt;
    }
  }

  // Equalities: initial condition, linearized dynamics, input differences.
  int row = 0;
  for (int i = 0; i < 4; ++i, ++row) {
    qp.E(row, lay.z_off(0) + i) = 1.0;
    qp.e[row] = z_cur[i];
  }
  std::vector<LinearDynamics> lin(static_cast<std::size_t>(H));
  for (int t = 0; t < H; ++t) {
    lin[t] = linearize_dynamics(ref[t].z, ref[t].u, params, cfg.dt);
    for (int i = 0; i < 4; ++i, ++row) {
      qp.E(row, lay.z_off(t + 1) + i) = 1.0;
      for (int j = 0; j < 4; ++j) qp.E(row, lay.z_off(t) + j) = -lin[t].A(i, j);
      for (int j = 0; j < 2; ++j) qp.E(row, lay.u_off(t) + j) = -lin[t].B(i, j);
      qp.e[row] = lin[t].C[i];
    }
  }
  for (int t = 0; t + 1 < H; ++t) {
    for (int i = 0; i < 2; ++i, ++row) {
      qp.E(row, lay.d_off(t) + i) = 1.0;
      qp.E(row, lay.u_off(t + 1) + i) = -1.0;
      qp.E(row, lay.u_off(t) + i) = 1.0;
      qp.e[row] = 0.0;
    }
  }

  // Warm start: previous solution if given, else roll the reference inputs
  // through the linearized dynamics (feasible for the equalities).
  QpOptions options;
  if (warm_start && warm_start->size() == n) {
    options.warm_start = *warm_start;
  } else {
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(n);
    Eigen::Vector4d z = z_cur;
    for (int i = 0; i < 4; ++i) x0[lay.z_off(0) + i] = z[i];
    for (int t = 0; t < H; ++t) {
      Eigen::Vector2d u = ref[t].u.cwiseMax(cfg.u_min).cwiseMin(cfg.u_max);
      for (int i = 0; i < 2; ++i) x0[lay.u_off(t) + i] = u[i];
      z = lin[t].A * z + lin[t].B * u + lin[t].C;
      for (int i = 0; i < 4; ++i) x0[lay.z_off(t + 1) + i] = z[i];
    }
    for (int t = 0; t + 1 < H; ++t) {
      for (int i = 0; i < 2; ++i) {
        x0[lay.d_off(t) + i] = x0[lay.u_off(t + 1) + i] - x0[lay.u_off(t) + i];
      }
    }
    options.warm_start = std::move(x0);
  }

  const QpResult qr = qp_solve(qp, options);
  if (warm_start_out) *warm_start_out = qr.x;

  MpcSolution sol;
  sol.iterations = qr.iterations;
  sol.states.resize(static_cast<std::size_t>(H) + 1);
  sol.inputs.resize(static_cast<std::size_t>(H));
  for (int t = 0; t <= H; ++t) {
    for (int i = 0; i < 4; ++i) sol.states[t][i] = qr.x[lay.z_off(t) + i];
  }
  for (int t = 0; t < H; ++t) {
    for (int i = 0; i < 2; ++i) sol.inputs[t][i] = qr.x[lay.u_off(t) + i];
  }

  // Objective in the tracking form (excludes nothing; the QP constant terms
  // are restored by evaluating directly).
  double obj = 0.0;
  for (int t = 0; t <= H; ++t) {
    const Eigen::Vector4d dz = sol.states[t] - ref[t].z;
    const Eigen::Vector4d& w = t == H ? cfg.q_final : cfg.q_step;
    obj += dz.cwiseProduct(w).dot(dz);
  }
  for (int t = 0; t < H; ++t) {
    const Eigen::Vector2d du = sol.inputs[t] - ref[t].u;
    obj += du.cwiseProduct(cfg.r_step).dot(du);
  }
  for (int t = 0; t + 1 < H; ++t) {
    const Eigen::Vector2d dd = sol.inputs[t + 1] - sol.inputs[t];
    obj += dd.cwiseProduct(cfg.r_diff).dot(dd);
  }
  sol.objective = obj;

  // Solution invariants, checked on every solve.
  const double slack = 1e-6;
  if ((sol.states[0] - z_cur).cwiseAbs().maxCoeff() > slack) {
    throw SolverError("solve_mpc: initial-condition residual exceeds tolerance");
  }
  for (int t = 0; t < H; ++t) {
    const Eigen::Vector4d res =
        sol.states[t + 1] - (lin[t].A * sol.states[t] + lin[t].B * sol.inputs[t] + lin[t].C);
    if (res.cwiseAbs().maxCoeff() > slack) {
      throw SolverError("solve_mpc: dynamics residual exceeds tolerance at step " +
                        std::to_string(t));
    }
    for (int i = 0; i < 2; ++i) {
      if (sol.inputs[t][i] < cfg.u_min[i] - slack || sol.inputs[t][i] > cfg.u_max[i] + slack) {
        throw SolverError("solve_mpc: input bound violated at step " + std::to_string(t));
      }
    }
  }
  for (int t = 0; t <= H; ++t) {
    for (int i = 0; i < 4; ++i) {
      if (sol.states[t][i] < cfg.z_min[i] - slack || sol.states[t][i] > cfg.z_max[i] + slack) {
        throw SolverError("solve_mpc: state bound violated at step " + std::to_string(t));
      }
    }
  }
  return sol;
}

}  // namespace raceplan
