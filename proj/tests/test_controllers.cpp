#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "raceplan/controllers.hpp"
#include "raceplan/error.hpp"
#include "raceplan/rng.hpp"

using namespace raceplan;

namespace {

Eigen::Vector4d dynamics_rhs(const Eigen::Vector4d& z, const Eigen::Vector2d& u,
                             const VehicleParams& p) {
  Eigen::Vector4d f;
  f << z[2] * std::cos(z[3]), z[2] * std::sin(z[3]), u[0],
      z[2] * std::tan(u[1]) / p.wheelbase;
  return f;
}

std::vector<Point2D> straight_points(int n, double spacing, double y = 0.0) {
  std::vector<Point2D> pts;
  for (int i = 0; i < n; ++i) pts.push_back({i * spacing, y});
  return pts;
}

}  // namespace

TEST_CASE("pure pursuit: point dead ahead gives zero steering") {
  VehicleParams p;
  PurePursuitConfig cfg;
  const Action a =
      pure_pursuit_control(VehicleState{0, 0, 1, 0}, straight_points(20, 0.2), cfg, p);
  CHECK(a.delta_des == doctest::Approx(0.0));
  CHECK(a.v_des == doctest::Approx(cfg.speed));
}

TEST_CASE("pure pursuit: hand-substituted curvature case") {
  // L = 0.8, e = 0.4, L_wb = 0.33: gamma = 2*0.4/0.64 = 1.25,
  // delta = atan(1.25 * 0.33).
  VehicleParams p;
  p.wheelbase = 0.33;
  PurePursuitConfig cfg;
  cfg.lookahead = 0.8;
  // A lateral segment at the lookahead distance: the lookahead point is
  // (sqrt(0.8^2-0.4^2), 0.4), giving e = 0.4 exactly.
  const double fx = std::sqrt(0.8 * 0.8 - 0.4 * 0.4);
  std::vector<Point2D> traj{{0.0, 0.0}, {fx, 0.4}, {2.0 * fx, 0.8}};
  const Action a = pure_pursuit_control(VehicleState{0, 0, 1, 0}, traj, cfg, p);
  const double expected = std::atan(2.0 * 0.4 / (0.8 * 0.8) * 0.33);
  CHECK(a.delta_des == doctest::Approx(expected).epsilon(1e-9));

  // Mirror: antisymmetry in e.
  std::vector<Point2D> mirrored{{0.0, 0.0}, {fx, -0.4}, {2.0 * fx, -0.8}};
  const Action b = pure_pursuit_control(VehicleState{0, 0, 1, 0}, mirrored, cfg, p);
  CHECK(b.delta_des == doctest::Approx(-expected).epsilon(1e-9));
}

TEST_CASE("pure pursuit: antisymmetry property over random trajectories") {
  VehicleParams p;
  PurePursuitConfig cfg;
  Rng rng(51);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Point2D> traj, mirrored;
    double x = 0.3;
    for (int i = 0; i < 12; ++i) {
      const double y = rng.uniform(-0.5, 0.5);
      traj.push_back({x, y});
      mirrored.push_back({x, -y});
      x += rng.uniform(0.1, 0.4);
    }
    const Action a = pure_pursuit_control(VehicleState{0, 0, 1, 0}, traj, cfg, p);
    const Action b = pure_pursuit_control(VehicleState{0, 0, 1, 0}, mirrored, cfg, p);
    CHECK(a.delta_des == doctest::Approx(-b.delta_des).epsilon(1e-12));
  }
}

TEST_CASE("pure pursuit ignores points beyond the lookahead point") {
  VehicleParams p;
  PurePursuitConfig cfg;
  Rng rng(53);
  std::vector<Point2D> traj = straight_points(8, 0.2, 0.1);
  std::vector<Point2D> extended = traj;
  for (int i = 0; i < 5; ++i) {
    extended.push_back({10.0 + i, rng.uniform(-3.0, 3.0)});
  }
  const Action a = pure_pursuit_control(VehicleState{0, 0, 1, 0}, traj, cfg, p);
  const Action b = pure_pursuit_control(VehicleState{0, 0, 1, 0}, extended, cfg, p);
  CHECK(a.delta_des == doctest::Approx(b.delta_des).epsilon(1e-12));
}

TEST_CASE("pure pursuit: all points near use the final point's distance") {
  VehicleParams p;
  PurePursuitConfig cfg;  // lookahead 0.8
  std::vector<Point2D> traj{{0.1, 0.0}, {0.2, 0.1}, {0.3, 0.15}};
  const Action a = pure_pursuit_control(VehicleState{0, 0, 1, 0}, traj, cfg, p);
  const double d = std::hypot(0.3, 0.15);
  const double gamma = 2.0 * 0.15 / (d * d);
  const double expected =
      std::clamp(std::atan(gamma * p.wheelbase), -p.delta_max, p.delta_max);
  CHECK(a.delta_des == doctest::Approx(expected).epsilon(1e-9));

  CHECK_THROWS_AS(pure_pursuit_control(VehicleState{0, 0, 1, 0}, {}, cfg, p),
                  ValidationError);
}

TEST_CASE("linearize_dynamics is exact at the reference point") {
  VehicleParams p;
  Rng rng(57);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::Vector4d z(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(0, 3),
                      rng.uniform(-3, 3));
    Eigen::Vector2d u(rng.uniform(-3, 3), rng.uniform(-0.4, 0.4));
    const double dt = 0.1;
    const LinearDynamics lin = linearize_dynamics(z, u, p, dt);
    const Eigen::Vector4d direct = z + dt * dynamics_rhs(z, u, p);
    const Eigen::Vector4d linearized = lin.A * z + lin.B * u + lin.C;
    CHECK((direct - linearized).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("linearize_dynamics Jacobians match central finite differences") {
  VehicleParams p;
  Rng rng(59);
  const double h = 1e-6;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::Vector4d z(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0.1, 2.5),
                      rng.uniform(-3, 3));
    Eigen::Vector2d u(rng.uniform(-2, 2), rng.uniform(-0.35, 0.35));
    const double dt = 0.1;
    const LinearDynamics lin = linearize_dynamics(z, u, p, dt);
    for (int j = 0; j < 4; ++j) {
      Eigen::Vector4d zp = z, zm = z;
      zp[j] += h;
      zm[j] -= h;
      const Eigen::Vector4d col =
          (dynamics_rhs(zp, u, p) - dynamics_rhs(zm, u, p)) / (2.0 * h);
      // A = I + dt * df/dz
      for (int i = 0; i < 4; ++i) {
        const double expected = (i == j ? 1.0 : 0.0) + dt * col[i];
        CHECK(std::abs(lin.A(i, j) - expected) < 1e-6);
      }
    }
    for (int j = 0; j < 2; ++j) {
      Eigen::Vector2d up = u, um = u;
      up[j] += h;
      um[j] -= h;
      const Eigen::Vector4d col =
          (dynamics_rhs(z, up, p) - dynamics_rhs(z, um, p)) / (2.0 * h);
      for (int i = 0; i < 4; ++i) {
        CHECK(std::abs(lin.B(i, j) - dt * col[i]) < 1e-6);
      }
    }
  }
}

TEST_CASE("linearization error is second order (halving the perturbation)") {
  VehicleParams p;
  Rng rng(61);
  const Eigen::Vector4d z_r(1.0, -0.5, 1.5, 0.4);
  const Eigen::Vector2d u_r(0.5, 0.1);
  const LinearDynamics lin = linearize_dynamics(z_r, u_r, p, 0.1);
  const Eigen::Vector4d dz0 =
      Eigen::Vector4d::NullaryExpr([&](Eigen::Index) { return rng.normal(); });
  const Eigen::Vector2d du0(rng.normal(), rng.normal());
  double prev_err = -1.0;
  for (double scale : {0.1, 0.05, 0.025, 0.0125}) {
    const Eigen::Vector4d z = z_r + scale * dz0;
    const Eigen::Vector2d u = u_r + scale * du0;
    const Eigen::Vector4d exact = z + 0.1 * dynamics_rhs(z, u, p);
    const double err = (lin.A * z + lin.B * u + lin.C - exact).norm();
    if (prev_err > 0.0) {
      CHECK(err < prev_err / 3.0);  // O(scale^2): halving cuts it ~4x
    }
    prev_err = err;
  }
}

TEST_CASE("solve_mpc: a consistent reference is a zero-cost fixed point") {
  VehicleParams p;
  MpcConfig cfg;
  cfg.horizon = 9;
  // Roll the reference forward with the linearized dynamics so it is exactly
  // consistent with the QP's equality model.
  std::vector<MpcReferencePoint> ref(10);
  ref[0].z << 0.0, 0.0, 1.5, 0.0;
  for (int t = 0; t < 9; ++t) {
    ref[t].u << 0.0, 0.0;
    const LinearDynamics lin = linearize_dynamics(ref[t].z, ref[t].u, p, cfg.dt);
    ref[t + 1].z = lin.A * ref[t].z + lin.B * ref[t].u + lin.C;
  }
  const MpcSolution sol =
      solve_mpc(VehicleState{0, 0, 1.5, 0}, ref, cfg, p);
  CHECK(sol.objective < 1e-12);
  for (int t = 0; t < 9; ++t) {
    CHECK(std::abs(sol.inputs[t][0]) < 1e-7);
    CHECK(std::abs(sol.inputs[t][1]) < 1e-7);
  }
}

TEST_CASE("solve_mpc single step matches the normal-equations oracle") {
  VehicleParams p;
  MpcConfig cfg;
  cfg.horizon = 1;
  Rng rng(63);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<MpcReferencePoint> ref(2);
    ref[0].z << 0.0, 0.0, 1.0, 0.0;
    ref[0].u << rng.uniform(-0.5, 0.5), rng.uniform(-0.2, 0.2);
    ref[1].z << 0.12, rng.uniform(-0.05, 0.05), 1.0 + rng.uniform(-0.1, 0.1),
        rng.uniform(-0.2, 0.2);
    ref[1].u.setZero();
    const VehicleState state{0, 0, 1.0, 0};

    const MpcSolution sol = solve_mpc(state, ref, cfg, p);

    // Oracle: z0 fixed, z1 = A z0 + B u + C; minimize over u alone.
    // Unconstrained least squares in u: objective
    //   (z1(u)-z1r)' Q (z1(u)-z1r) + (u-ur)' R (u-ur)
    const LinearDynamics lin = linearize_dynamics(ref[0].z, ref[0].u, p, cfg.dt);
    Eigen::Vector4d z0;
    z0 << state.x, state.y, state.v, state.theta;
    const Eigen::Matrix4d qf = cfg.q_final.asDiagonal();
    const Eigen::Matrix2d rs = cfg.r_step.asDiagonal();
    const Eigen::Matrix2d hmat =
        lin.B.transpose() * qf * lin.B + rs;
    const Eigen::Vector2d rhs =
        lin.B.transpose() * qf * (ref[1].z - lin.A * z0 - lin.C) + rs * ref[0].u;
    const Eigen::Vector2d u_star = hmat.ldlt().solve(rhs);
    CHECK((sol.inputs[0] - u_star).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("solve_mpc recovers a 0.5 m lateral offset in closed loop") {
  VehicleParams p;
  MpcConfig cfg;
  cfg.horizon = 9;
  // Straight reference along x at 1.5 m/s; vehicle starts 0.5 m off.
  SimState sim;
  sim.state = VehicleState{0.0, 0.5, 1.5, 0.0};
  sim.steer = 0.0;

  double t = 0.0;
  double settled_at = -1.0;
  std::optional<Eigen::VectorXd> warm;
  for (int step = 0; step < 60; ++step) {  // 6 simulated seconds
    std::vector<MpcReferencePoint> ref(10);
    for (int k = 0; k < 10; ++k) {
      ref[k].z << sim.state.x + 1.5 * cfg.dt * k, 0.0, 1.5, 0.0;
      ref[k].u << 0.0, 0.0;
    }
    Eigen::VectorXd warm_out;
    const MpcSolution sol = solve_mpc(sim.state, ref, cfg, p, warm, &warm_out);
    warm = warm_out;
    if (step == 0) {
      // First command steers toward the reference (negative y error -> right).
      CHECK(sol.inputs[0][1] < 0.0);
    }
    Action a;
    a.delta_des = sol.inputs[0][1];
    a.v_des = std::clamp(sim.state.v + sol.inputs[0][0] * kSpeedLagTau, 0.0, p.v_max);
    for (int i = 0; i < 10; ++i) sim = step_dynamics(sim, a, p, 0.01);
    t += 0.1;
    if (settled_at < 0.0 && std::abs(sim.state.y) < 0.05) settled_at = t;
  }
  CHECK(settled_at > 0.0);
  CHECK(settled_at <= 3.0);
  CHECK(std::abs(sim.state.y) < 0.05);
}

TEST_CASE("solve_mpc rejects an initial state outside the bounds") {
  VehicleParams p;
  MpcConfig cfg;
  cfg.horizon = 2;
  cfg.z_max[2] = 2.0;
  std::vector<MpcReferencePoint> ref(3);
  for (auto& r : ref) r.z << 0, 0, 1.0, 0;
  CHECK_THROWS_WITH_AS(solve_mpc(VehicleState{0, 0, 3.0, 0}, ref, cfg, p),
                       doctest::Contains("violates state bounds"), SolverError);
}

TEST_CASE("build_mpc_reference derives headings, accel, and steering") {
  VehicleParams p;
  MpcConfig cfg;
  std::vector<Point2D> pts;
  std::vector<double> speeds;
  for (int i = 0; i < 10; ++i) {
    pts.push_back({0.2 * i, 0.0});
    speeds.push_back(1.0 + 0.1 * i);
  }
  const auto ref = build_mpc_reference(pts, speeds, p, cfg);
  REQUIRE(ref.size() == 10);
  CHECK(ref[0].z[3] == doctest::Approx(0.0));
  CHECK(ref[0].u[0] == doctest::Approx(0.1 / cfg.dt).epsilon(1e-9));
  CHECK(ref[0].u[1] == doctest::Approx(0.0));
  CHECK(ref[9].u[0] == doctest::Approx(0.0));
}
