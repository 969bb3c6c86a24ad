#pragma once

#include <stdexcept>
#include <vector>

#include "plmpc/ocp.hpp"

namespace plmpc {

struct GuardConfig {
  Eigen::VectorXd mu0 = Eigen::VectorXd::Ones(1);  ///< scalar broadcasts; a full
                                                   ///< vector weighs rows separately
  double growth = 10.0;                            ///< gamma, > 1
  double grad_tolerance = 1e-6;                    ///< xi, inner stop
  double constraint_tolerance = 1e-6;
  int max_outer_iterations = 12;
  int max_inner_iterations = 500;

  void validate() const;
};

struct GuardReport {
  int outer_iterations = 0;
  double violation_before = 0.0;
  double final_violation = 0.0;
  std::vector<double> violation_history;  ///< max(G) after each outer iteration
  bool projected = false;                 ///< false when returned unchanged
};

/// Raised when the penalty budget is exhausted above tolerance. Carries the
/// best iterate found.
class GuardFailure : public std::runtime_error {
 public:
  GuardFailure(std::string what, ControlSequence best, double violation)
      : std::runtime_error(std::move(what)),
        best_iterate(std::move(best)),
        final_violation(violation) {}

  ControlSequence best_iterate;
  double final_violation;
};

/// Projects an infeasible control sequence toward the constraint set by the
/// quadratic penalty method: minimize |U - U_p|_2 + mu * sum([G]+)^2 by
/// gradient descent with backtracking, growing mu until max(G) falls under
/// tolerance. Feasible inputs return unchanged with zero outer iterations.
ControlSequence project_feasible(const Eigen::VectorXd& x, const ControlSequence& u_p,
                                 const OcpSpec& spec, const DynamicsModel& model,
                                 const GuardConfig& cfg, GuardReport* report = nullptr);

}  // namespace plmpc
