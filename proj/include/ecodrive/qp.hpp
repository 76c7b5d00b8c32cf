#pragma once

#include <Eigen/Core>

namespace ecodrive {

/// min 1/2 z'Hz + c'z  s.t.  A z = b,  G z <= h.  H must be PSD.
struct QpProblem
{
  Eigen::MatrixXd H;
  Eigen::VectorXd c;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::MatrixXd G;
  Eigen::VectorXd h;

  Eigen::Index size() const { return c.size(); }
};

enum class QpStatus { Optimal, Infeasible };

struct QpResult
{
  QpStatus status{QpStatus::Infeasible};
  Eigen::VectorXd z;
  /// Multipliers for A z = b and G z <= h.
  Eigen::VectorXd y;
  Eigen::VectorXd lambda;
  double objective{0};
  int iterations{0};
  /// On infeasibility: lambda >= 0, y with G'lambda + A'y = 0 and h'lambda + b'y < 0.
  Eigen::VectorXd farkas_ineq;
  Eigen::VectorXd farkas_eq;
};

struct QpOptions
{
  double tol{1e-9};
  int max_iter{100};
  /// Phase-1 optimum above this means the constraints admit no point.
  double infeasible_tol{1e-7};
};

struct KktResiduals
{
  double stationarity{0};
  double primal_eq{0};
  double primal_ineq{0};
  double dual_sign{0};
  double complementarity{0};

  double max() const;
};

/**
 * Mehrotra predictor-corrector interior point on the dense KKT system.
 * A phase-1 LP (min t s.t. G z - t <= h, t >= -1) runs first; a positive
 * optimum yields a Farkas certificate instead of a solution.
 */
QpResult solve_qp(const QpProblem & p, const QpOptions & opt = {});

/// Independent evaluation of the optimality conditions at (z, y, lambda).
KktResiduals kkt_residuals(const QpProblem & p, const QpResult & r);

}  // namespace ecodrive
