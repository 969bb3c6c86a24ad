#include "plmpc/guard.hpp"

#include <cmath>

namespace plmpc {

namespace {

// Distance gradient switches to the squared form near the singularity at
// U = U_p, where the penalty start point sits.
Eigen::VectorXd distance_gradient(const Eigen::VectorXd& diff) {
  double norm = diff.norm();
  if (norm < 1e-9) return 2.0 * diff;
  return diff / norm;
}

struct PenaltyEval {
  double value = 0.0;
  double max_violation = 0.0;
  bool diverged = false;
};

PenaltyEval penalty_value(const Eigen::VectorXd& x, const ControlSequence& u_p,
                          const Eigen::VectorXd& z, const Eigen::VectorXd& mu,
                          const OcpSpec& spec, const DynamicsModel& model) {
  PenaltyEval out;
  ControlSequence U = ControlSequence::from_stacked(spec.horizon, spec.input_dim(), z);
  RolloutData roll = rollout_data(x, U, model, false);
  if (roll.diverged) {
    out.diverged = true;
    return out;
  }
  Eigen::VectorXd g = stacked_constraints(roll, U, spec);
  Eigen::VectorXd pos = g.cwiseMax(0.0);
  out.value = (z - u_p.stacked).norm() + mu.dot(pos.cwiseProduct(pos));
  out.max_violation = g.maxCoeff();
  return out;
}

}  // namespace

void GuardConfig::validate() const {
  if (mu0.size() < 1 || !(mu0.array() > 0.0).all())
    throw std::invalid_argument("GuardConfig: mu0 must be positive");
  if (!(growth > 1.0)) throw std::invalid_argument("GuardConfig: growth must be > 1");
  if (!(grad_tolerance > 0.0) || !(constraint_tolerance > 0.0))
    throw std::invalid_argument("GuardConfig: tolerances must be > 0");
  if (max_outer_iterations < 1 || max_inner_iterations < 1)
    throw std::invalid_argument("GuardConfig: iteration budgets must be >= 1");
}

ControlSequence project_feasible(const Eigen::VectorXd& x, const ControlSequence& u_p,
                                 const OcpSpec& spec, const DynamicsModel& model,
                                 const GuardConfig& cfg, GuardReport* report) {
  cfg.validate();
  if (u_p.horizon != spec.horizon || u_p.input_dim != spec.input_dim())
    throw std::invalid_argument("project_feasible: sequence shape mismatch");

  const Eigen::Index rows = spec.num_constraints();
  Eigen::VectorXd mu;
  if (cfg.mu0.size() == 1)
    mu = Eigen::VectorXd::Constant(rows, cfg.mu0[0]);
  else if (cfg.mu0.size() == rows)
    mu = cfg.mu0;
  else
    throw std::invalid_argument("project_feasible: mu0 must be scalar or one per row");

  GuardReport local;
  GuardReport& rep = report ? *report : local;
  rep = GuardReport{};

  Eigen::VectorXd g0 = constraints(x, u_p, spec, model);
  rep.violation_before = g0.maxCoeff();
  if (rep.violation_before <= cfg.constraint_tolerance) {
    rep.final_violation = rep.violation_before;
    return u_p;
  }

  Eigen::VectorXd z = u_p.stacked;
  double step_hint = 1.0;

  for (int outer = 0; outer < cfg.max_outer_iterations; ++outer) {
    for (int inner = 0; inner < cfg.max_inner_iterations; ++inner) {
      ControlSequence U =
          ControlSequence::from_stacked(spec.horizon, spec.input_dim(), z);
      RolloutData roll = rollout_data(x, U, model, true);
      if (roll.diverged)
        throw DivergedRollout("project_feasible: rollout diverged");
      Eigen::VectorXd g = stacked_constraints(roll, U, spec);
      Eigen::VectorXd w = 2.0 * mu.cwiseProduct(g.cwiseMax(0.0));
      Eigen::VectorXd grad =
          distance_gradient(z - u_p.stacked) + ocp_gradient(roll, U, spec, 0.0, &w);
      double gn = grad.norm();
      if (gn < cfg.grad_tolerance) break;

      PenaltyEval here = penalty_value(x, u_p, z, mu, spec, model);
      double t = step_hint;
      bool accepted = false;
      for (int bt = 0; bt < 60; ++bt) {
        PenaltyEval trial = penalty_value(x, u_p, z - t * grad, mu, spec, model);
        if (!trial.diverged && trial.value <= here.value - 1e-4 * t * gn * gn) {
          z -= t * grad;
          accepted = true;
          step_hint = 2.0 * t;
          break;
        }
        t *= 0.5;
      }
      if (!accepted) break;
    }

    PenaltyEval state = penalty_value(x, u_p, z, mu, spec, model);
    rep.violation_history.push_back(state.max_violation);
    rep.outer_iterations = outer + 1;
    rep.final_violation = state.max_violation;
    if (state.max_violation <= cfg.constraint_tolerance) {
      rep.projected = true;
      return ControlSequence::from_stacked(spec.horizon, spec.input_dim(), z);
    }
    mu *= cfg.growth;
  }

  throw GuardFailure(
      "project_feasible: violation " + std::to_string(rep.final_violation) +
          " above tolerance after " + std::to_string(cfg.max_outer_iterations) +
          " outer iterations",
      ControlSequence::from_stacked(spec.horizon, spec.input_dim(), z),
      rep.final_violation);
}

}  // namespace plmpc
