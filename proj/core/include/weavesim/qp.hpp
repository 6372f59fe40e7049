#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <cstdint>
#include <limits>
#include <optional>

namespace weavesim {

enum class QpStatus { Optimal, Infeasible, MaxIter };

// Convex quadratic program
//   minimize    0.5 x' H x + f' x
//   subject to  A_eq x = b_eq
//               A_in x <= b_in
//               lb <= x <= ub          (+-inf entries allowed)
// H must be symmetric positive semidefinite. Constraint matrices are stored
// sparse; the problem class itself is a dense convex QP.
struct QpProblem {
  Eigen::SparseMatrix<double> H;
  Eigen::VectorXd f;
  Eigen::SparseMatrix<double> A_eq;
  Eigen::VectorXd b_eq;
  Eigen::SparseMatrix<double> A_in;
  Eigen::VectorXd b_in;
  Eigen::VectorXd lb;
  Eigen::VectorXd ub;

  // Optional strictly feasible starting point; used when it satisfies all
  // inequalities strictly, otherwise the solver runs its own phase 1.
  std::optional<Eigen::VectorXd> x0_hint;

  // Metadata carried along for diagnostics (receding-horizon bookkeeping).
  int horizon = 0;
  int varsigma = 0;
  std::uint64_t sv_id = 0;

  int n() const { return static_cast<int>(f.size()); }
};

struct QpSolverOptions {
  double tol = 1e-6;        // duality-measure target (scaled)
  int max_newton = 100;     // total Newton steps across both phases
  double mu_init = 10.0;    // initial barrier parameter
  double mu_factor = 0.2;   // geometric reduction per centering stage
};

struct QpSolution {
  QpStatus status = QpStatus::MaxIter;
  Eigen::VectorXd x;
  double objective = std::numeric_limits<double>::infinity();
  int newton_iters = 0;
  double duality_measure = std::numeric_limits<double>::infinity();
  double primal_residual = std::numeric_limits<double>::infinity();
};

// Log-barrier interior-point solve. Equality constraints are kept explicit
// (one KKT solve per Newton step, factorized sparse); inequalities enter the
// log barrier with geometric mu reduction. Returns Optimal once the duality
// measure m*mu drops below tol*(1+|objective|) with primal residuals within
// tolerance, Infeasible when phase 1 proves the inequalities cannot be
// satisfied, MaxIter otherwise. Throws std::invalid_argument when H is not
// symmetric positive semidefinite or dimensions disagree.
QpSolution solve_qp(const QpProblem& problem, const QpSolverOptions& opts = {});

}  // namespace weavesim
