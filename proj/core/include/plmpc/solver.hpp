#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "plmpc/ocp.hpp"
#include "plmpc/terminal.hpp"

namespace plmpc {

enum class SolveStatus : std::uint8_t {
  kOptimal = 0,
  kMaxIterations = 1,
  kInfeasible = 2,
};

const char* to_string(SolveStatus status);

struct SolverConfig {
  int max_iterations = 200;
  double kkt_tolerance = 1e-6;
  double constraint_tolerance = 1e-6;
  double merit_penalty = 10.0;     ///< initial l1 penalty on violations
  double backtrack_factor = 0.5;   ///< in (0, 1)
  double min_step = 1e-12;
  double armijo_c = 1e-4;
  double bfgs_damping = 0.2;       ///< Powell damping threshold
  int qp_max_iterations = 60;
  int prephase_max_iterations = 60;
  bool warm_start = true;

  void validate() const;
};

struct SolveResult {
  ControlSequence control;
  double cost = 0.0;
  SolveStatus status = SolveStatus::kMaxIterations;
  int iterations = 0;
  double kkt_residual = 0.0;
  double max_violation = 0.0;  ///< over stacked rows plus the terminal row
  double wall_time_s = 0.0;
};

/// Solves the finite-horizon OCP from x0 by single-shooting SQP: damped BFGS
/// Hessian (Gauss-Newton initialized), interior-point QP subproblems, and an
/// l1-merit backtracking line search. Infeasibility is reported through the
/// status, never thrown.
SolveResult solve_ocp(const Eigen::VectorXd& x0, const OcpSpec& spec,
                      const DynamicsModel& model, const SolverConfig& cfg,
                      const ControlSequence* warm_start = nullptr);

/// Cheap feasibility probe: violation minimization from the zero sequence.
bool probe_feasible(const Eigen::VectorXd& x0, const OcpSpec& spec,
                    const DynamicsModel& model, const SolverConfig& cfg);

class SolverFailure : public std::runtime_error {
 public:
  SolverFailure(int step, SolveStatus status, const std::string& what)
      : std::runtime_error(what), step_(step), status_(status) {}
  int step() const { return step_; }
  SolveStatus status() const { return status_; }

 private:
  int step_;
  SolveStatus status_;
};

struct RecedingHorizonStep {
  Eigen::VectorXd state;
  Eigen::VectorXd input;
  double stage_cost = 0.0;
  double optimal_cost = 0.0;
  double warm_start_cost = 0.0;  ///< NaN on the cold first step
  double solve_time_s = 0.0;
  int iterations = 0;
};

struct RecedingHorizonRun {
  std::vector<RecedingHorizonStep> steps;
  Eigen::VectorXd final_state;
};

/// Standard NMPC loop: solve, apply the first input, shift the solution and
/// append kappa of the predicted terminal state as the next warm start.
/// Throws SolverFailure with the step index if a solve does not reach
/// optimality.
RecedingHorizonRun receding_horizon_run(const Eigen::VectorXd& x0,
                                        const OcpSpec& spec,
                                        const DynamicsModel& model,
                                        const SolverConfig& cfg, int steps,
                                        const TerminalLaw* law = nullptr);

}  // namespace plmpc
