#include "raceplan/qp.hpp"

#include <algorithm>
#include <cmath>

#include <optional>
#include "raceplan/error.hpp"

namespace raceplan {

namespace {

enum class VarState : std::uint8_t { kFree, kAtLo, kAtHi };

double objective_value(const QpProblem& p, const Eigen::VectorXd& x) {
  return 0.5 * x.dot(p.P * x) + p.q.dot(x);
}

// Min-norm correction onto {x : Ex = e} via a rank-revealing decomposition,
// shared across Dykstra sweeps. Empty when there are no equalities.
struct AffineProjector {
  explicit AffineProjector(const Eigen::MatrixXd& E) {
    if (E.rows() > 0) cod.emplace(E);
  }
  std::optional<Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>> cod;
};

Eigen::VectorXd clamp_to_box(const QpProblem& p, Eigen::VectorXd x) {
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], p.lo[i], p.hi[i]);
  return x;
}

// Dykstra's alternating projections onto {Ex=e} ∩ box. Returns a point with
// equality residual below tol, or throws naming the worst constraint.
Eigen::VectorXd find_feasible(const QpProblem& p, const AffineProjector& proj,
                              Eigen::VectorXd x, double tol) {
  if (p.E.rows() == 0) return clamp_to_box(p, std::move(x));

  const Eigen::Index n = x.size();
  Eigen::VectorXd corr_a = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd corr_b = Eigen::VectorXd::Zero(n);
  // Precompute the pseudo-inverse application once per call via the shared
  // decomposition; Dykstra needs repeated affine projections.
  const Eigen::MatrixXd pinv = proj.cod->pseudoInverse();

  for (int iter = 0; iter < 5000; ++iter) {
    const Eigen::VectorXd y = (x + corr_a) - pinv * (p.E * (x + corr_a) - p.e);
    corr_a = x + corr_a - y;
    const Eigen::VectorXd z = clamp_to_box(p, y + corr_b);
    corr_b = y + corr_b - z;
    x = z;
    if ((p.E * x - p.e).cwiseAbs().maxCoeff() <= tol) return x;
  }
  const Eigen::VectorXd residual = (p.E * x - p.e).cwiseAbs();
  Eigen::Index worst = 0;
  residual.maxCoeff(&worst);
  throw SolverError("qp_solve: no feasible point; equality row " + std::to_string(worst) +
                    " residual " + std::to_string(residual[worst]));
}

}  // namespace

QpResult qp_solve(const QpProblem& problem, const QpOptions& options) {
  const Eigen::Index n = problem.P.rows();
  const Eigen::Index m = problem.E.rows();
  if (problem.q.size() != n || problem.lo.size() != n || problem.hi.size() != n ||
      (m > 0 && problem.E.cols() != n) || problem.e.size() != m) {
    throw ValidationError("qp_solve: inconsistent problem dimensions");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (problem.lo[i] > problem.hi[i]) {
      throw ValidationError("qp_solve: lo > hi at variable " + std::to_string(i));
    }
  }

  const AffineProjector projector(problem.E);
  Eigen::VectorXd start =
      options.warm_start.size() == n ? options.warm_start : Eigen::VectorXd::Zero(n);
  Eigen::VectorXd x = find_feasible(problem, projector, std::move(start),
                                    options.feasibility_tol);

  std::vector<VarState> state(static_cast<std::size_t>(n), VarState::kFree);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (x[i] <= problem.lo[i]) state[i] = VarState::kAtLo;
    else if (x[i] >= problem.hi[i]) state[i] = VarState::kAtHi;
  }

  QpResult result;
  result.objective_history.push_back(objective_value(problem, x));
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(m);

  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    // Assemble the KKT system over the free variables.
    std::vector<Eigen::Index> free_idx;
    free_idx.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      if (state[i] == VarState::kFree) free_idx.push_back(i);
    }
    const Eigen::Index nf = static_cast<Eigen::Index>(free_idx.size());

    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(nf + m, nf + m);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nf + m);
    for (Eigen::Index a = 0; a < nf; ++a) {
      for (Eigen::Index b = 0; b < nf; ++b) kkt(a, b) = problem.P(free_idx[a], free_idx[b]);
      rhs[a] = -problem.q[free_idx[a]];
      for (Eigen::Index i = 0; i < n; ++i) {
        if (state[i] != VarState::kFree) rhs[a] -= problem.P(free_idx[a], i) * x[i];
      }
    }
    for (Eigen::Index r = 0; r < m; ++r) {
      for (Eigen::Index a = 0; a < nf; ++a) {
        kkt(nf + r, a) = problem.E(r, free_idx[a]);
        kkt(a, nf + r) = problem.E(r, free_idx[a]);
      }
      rhs[nf + r] = problem.e[r];
      for (Eigen::Index i = 0; i < n; ++i) {
        if (state[i] != VarState::kFree) rhs[nf + r] -= problem.E(r, i) * x[i];
      }
    }

    Eigen::VectorXd sol = Eigen::VectorXd::Zero(nf + m);
    if (nf + m > 0) {
      sol = kkt.partialPivLu().solve(rhs);
      if (!sol.allFinite() || (kkt * sol - rhs).cwiseAbs().maxCoeff() > 1e-7) {
        sol = kkt.fullPivLu().solve(rhs);  // degenerate working set
        if (!sol.allFinite()) {
          throw SolverError("qp_solve: singular KKT system", result.objective_history);
        }
      }
    }
    lambda = sol.tail(m);

    Eigen::VectorXd target = x;
    for (Eigen::Index a = 0; a < nf; ++a) target[free_idx[a]] = sol[a];
    const Eigen::VectorXd step = target - x;

    if (step.cwiseAbs().maxCoeff() <= options.step_tol) {
      // Stationary on the working set: check bound multipliers.
      const Eigen::VectorXd g = problem.P * x + problem.q +
                                (m > 0 ? Eigen::VectorXd(problem.E.transpose() * lambda)
                                       : Eigen::VectorXd::Zero(n));
      Eigen::Index release = -1;
      double worst = -options.multiplier_tol;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (state[i] == VarState::kAtLo && g[i] < worst) {
          worst = g[i];
          release = i;
        } else if (state[i] == VarState::kAtHi && -g[i] < worst) {
          worst = -g[i];
          release = i;
        }
      }
      if (release < 0) break;  // KKT satisfied
      state[release] = VarState::kFree;
      result.objective_history.push_back(objective_value(problem, x));
      continue;
    }

    // Longest step inside the box along the free components.
    double alpha = 1.0;
    Eigen::Index blocking = -1;
    bool blocking_hi = false;
    for (Eigen::Index a = 0; a < nf; ++a) {
      const Eigen::Index i = free_idx[a];
      if (step[i] > 0.0 && problem.hi[i] < kQpInf) {
        const double room = (problem.hi[i] - x[i]) / step[i];
        if (room < alpha) {
          alpha = room;
          blocking = i;
          blocking_hi = true;
        }
      } else if (step[i] < 0.0 && problem.lo[i] > -kQpInf) {
        const double room = (problem.lo[i] - x[i]) / step[i];
        if (room < alpha) {
          alpha = room;
          blocking = i;
          blocking_hi = false;
        }
      }
    }
    alpha = std::max(alpha, 0.0);
    x += alpha * step;
    if (blocking >= 0 && alpha < 1.0) {
      x[blocking] = blocking_hi ? problem.hi[blocking] : problem.lo[blocking];
      state[blocking] = blocking_hi ? VarState::kAtHi : VarState::kAtLo;
    }
    result.objective_history.push_back(objective_value(problem, x));
  }

  if (iter >= options.max_iterations) {
    throw SolverError("qp_solve: iteration limit (" + std::to_string(options.max_iterations) +
                          ") reached",
                      result.objective_history);
  }

  x = clamp_to_box(problem, std::move(x));  // remove round-off dust on bounds
  result.x = x;
  result.eq_multipliers = lambda;
  result.objective = objective_value(problem, x);
  result.iterations = iter + 1;
  result.primal_residual =
      m > 0 ? (problem.E * x - problem.e).cwiseAbs().maxCoeff() : 0.0;

  // Dual residual: gradient minus the bound multipliers implied by the state.
  Eigen::VectorXd g = problem.P * x + problem.q;
  if (m > 0) g += problem.E.transpose() * lambda;
  double dual = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool at_lo = x[i] <= problem.lo[i] + 1e-12;
    const bool at_hi = x[i] >= problem.hi[i] - 1e-12;
    if (at_lo && g[i] > 0.0) continue;
    if (at_hi && g[i] < 0.0) continue;
    dual = std::max(dual, std::abs(g[i]));
  }
  result.dual_residual = dual;
  return result;
}

}  // namespace raceplan
