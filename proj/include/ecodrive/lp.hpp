#pragma once

#include <Eigen/Core>

namespace ecodrive {

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpResult
{
  LpStatus status{LpStatus::Infeasible};
  Eigen::VectorXd x;
  /// Multipliers of the equality rows (after slacks are added for inequalities).
  Eigen::VectorXd y;
  double objective{0};
  int iterations{0};
};

/**
 * min c'x  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  x >= 0.
 *
 * Two-phase revised simplex for problems with few rows and many columns.
 * Dantzig pricing, switching to Bland's rule after a run of degenerate pivots.
 */
struct LpProblem
{
  Eigen::VectorXd c;
  Eigen::MatrixXd A_eq;
  Eigen::VectorXd b_eq;
  Eigen::MatrixXd A_ub;
  Eigen::VectorXd b_ub;
};

LpResult solve_lp(const LpProblem & p, double tol = 1e-9, int max_iter = 100000);

}  // namespace ecodrive
