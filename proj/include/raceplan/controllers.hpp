#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "raceplan/geometry.hpp"
#include "raceplan/qp.hpp"
#include "raceplan/vehicle_sim.hpp"

namespace raceplan {

struct PurePursuitConfig {
  double lookahead = 0.8;  // m
  double speed = 2.0;      // m/s
};

// Geometric pure pursuit on a world-frame point sequence. The lookahead point
// is the first trajectory point at distance >= lookahead from the rear axle,
// walking forward from the closest point and interpolating on the bracketing
// segment. Throws ValidationError on an empty trajectory.
Action pure_pursuit_control(const VehicleState& state, const std::vector<Point2D>& trajectory,
                            const PurePursuitConfig& cfg, const VehicleParams& params);

// MPC over z = [x y v theta], u = [a delta].
struct MpcConfig {
  int horizon = 9;
  double dt = 0.1;
  Eigen::Vector4d q_step{10.0, 10.0, 1.0, 1.0};
  Eigen::Vector4d q_final{20.0, 20.0, 2.0, 2.0};
  Eigen::Vector2d r_step{0.1, 0.5};
  Eigen::Vector2d r_diff{0.1, 1.0};
  Eigen::Vector4d z_min{-kQpInf, -kQpInf, 0.0, -kQpInf};
  Eigen::Vector4d z_max{kQpInf, kQpInf, 2.5, kQpInf};
  Eigen::Vector2d u_min{-3.0, -0.4189};
  Eigen::Vector2d u_max{3.0, 0.4189};
  Eigen::Vector2d du_min{-10.0, -3.2};  // per second
  Eigen::Vector2d du_max{10.0, 3.2};
};

struct MpcReferencePoint {
  Eigen::Vector4d z = Eigen::Vector4d::Zero();
  Eigen::Vector2d u = Eigen::Vector2d::Zero();
};

struct MpcSolution {
  std::vector<Eigen::Vector4d> states;  // horizon + 1
  std::vector<Eigen::Vector2d> inputs;  // horizon
  double objective = 0.0;
  int iterations = 0;
};

struct LinearDynamics {
  Eigen::Matrix4d A;
  Eigen::Matrix<double, 4, 2> B;
  Eigen::Vector4d C;
};

// Forward-Euler discretization of the Taylor expansion about the reference;
// exact at the reference point itself.
LinearDynamics linearize_dynamics(const Eigen::Vector4d& ref_state,
                                  const Eigen::Vector2d& ref_input,
                                  const VehicleParams& params, double dt);

// Builds a dynamically annotated reference from trajectory points and target
// speeds: headings from segment directions, steering from curvature,
// acceleration from speed differences.
std::vector<MpcReferencePoint> build_mpc_reference(const std::vector<Point2D>& points,
                                                   const std::vector<double>& speeds,
                                                   const VehicleParams& params,
                                                   const MpcConfig& cfg);

// Tracking MPC: quadratic state/input tracking costs plus an input-difference
// penalty, subject to linearized dynamics, the initial condition, and
// box/rate bounds. Solution invariants (dynamics residual and bound slack
// below 1e-6) are checked on every solve.
MpcSolution solve_mpc(const VehicleState& state,
                      const std::vector<MpcReferencePoint>& ref_trajectory,
                      const MpcConfig& cfg, const VehicleParams& params,
                      const std::optional<Eigen::VectorXd>& warm_start = std::nullopt,
                      Eigen::VectorXd* warm_start_out = nullptr);

}  // namespace raceplan
