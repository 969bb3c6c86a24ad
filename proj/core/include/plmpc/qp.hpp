#pragma once

#include <Eigen/Core>

namespace plmpc {

/// Result of min 1/2 x'Hx + g'x subject to A x <= b.
struct QpResult {
  Eigen::VectorXd x;
  Eigen::VectorXd multipliers;  ///< one nonnegative multiplier per row
  bool solved = false;
  int iterations = 0;
  double gap = 0.0;             ///< final complementarity measure
  double primal_residual = 0.0; ///< max(Ax - b)
};

/// Dense primal-dual interior-point method (Mehrotra predictor-corrector)
/// for strictly convex inequality-constrained QPs. H must be positive
/// definite. A may have zero rows (unconstrained minimization).
QpResult solve_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                  const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                  int max_iterations = 60);

}  // namespace plmpc
