#pragma once

#include <Eigen/Dense>
#include <vector>

namespace raceplan {

constexpr double kQpInf = 1e30;

// min 1/2 x'Px + q'x  s.t.  Ex = e,  lo <= x <= hi
// P must be positive definite on the null space of the active constraints.
struct QpProblem {
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  Eigen::MatrixXd E;  // may have zero rows
  Eigen::VectorXd e;
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

struct QpOptions {
  int max_iterations = 4000;
  double feasibility_tol = 1e-9;   // equality residual accepted as feasible
  double step_tol = 1e-11;         // stationarity threshold on the step
  double multiplier_tol = 1e-9;    // bound multiplier sign tolerance
  Eigen::VectorXd warm_start;      // size 0 = start from the origin
};

struct QpResult {
  Eigen::VectorXd x;
  Eigen::VectorXd eq_multipliers;
  double objective = 0.0;
  int iterations = 0;
  std::vector<double> objective_history;  // one entry per outer iteration
  double primal_residual = 0.0;
  double dual_residual = 0.0;
};

// Primal active-set solver over box bounds with a feasibility phase
// (Dykstra alternating projections between the affine set and the box).
// Iterates stay feasible, so the objective history is non-increasing.
// Throws SolverError when the iteration cap is hit or no feasible point is
// found; the error carries the objective history.
QpResult qp_solve(const QpProblem& problem, const QpOptions& options = {});

}  // namespace raceplan
