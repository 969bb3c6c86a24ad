#include "plmpc/controller.hpp"

#include <chrono>

namespace plmpc {

const char* to_string(StepBranch branch) {
  switch (branch) {
    case StepBranch::kKappa: return "kappa";
    case StepBranch::kPolicy: return "policy";
    case StepBranch::kPolicyGuarded: return "policy+guard";
  }
  return "unknown";
}

PlmpcController::PlmpcController(PolicyModel policy, OcpSpec spec, TerminalLaw law,
                                 GuardConfig guard)
    : policy_(std::move(policy)),
      spec_(std::move(spec)),
      law_(std::move(law)),
      guard_(std::move(guard)) {
  policy_.validate();
  spec_.validate();
  guard_.validate();
  if (policy_.horizon != spec_.horizon || policy_.input_dim != spec_.input_dim())
    throw std::invalid_argument("PlmpcController: policy/spec shape mismatch");
}

Eigen::VectorXd PlmpcController::act(const Eigen::VectorXd& x,
                                     const DynamicsModel& model,
                                     StepInfo* info) const {
  const auto t0 = std::chrono::steady_clock::now();
  if (!x.allFinite())
    throw std::invalid_argument("PlmpcController::act: non-finite state");

  StepInfo local;
  StepInfo& out = info ? *info : local;
  out = StepInfo{};

  Eigen::VectorXd u;
  if (in_inner_set(x, spec_)) {
    u = terminal_law_input(x, law_, spec_.u_min, spec_.u_max);
    out.branch = StepBranch::kKappa;
    kappa_steps_.fetch_add(1);
  } else {
    ControlSequence seq = policy_.eval(x);
    Eigen::VectorXd g = constraints(x, seq, spec_, model);
    out.violation_before = g.maxCoeff();
    if (out.violation_before > guard_.constraint_tolerance) {
      try {
        GuardReport rep;
        seq = project_feasible(x, seq, spec_, model, guard_, &rep);
        out.violation_after = rep.final_violation;
        out.branch = StepBranch::kPolicyGuarded;
        guard_steps_.fetch_add(1);
      } catch (const GuardFailure& failure) {
        if (in_terminal_set(x, spec_)) {
          u = terminal_law_input(x, law_, spec_.u_min, spec_.u_max);
          out.branch = StepBranch::kKappa;
          guard_fallbacks_.fetch_add(1);
          out.latency_s = std::chrono::duration<double>(
                              std::chrono::steady_clock::now() - t0)
                              .count();
          return u;
        }
        throw UnrecoverableStep(
            "act: guard failed outside the terminal set (violation " +
            std::to_string(failure.final_violation) + ")");
      }
    } else {
      out.violation_after = out.violation_before;
      out.branch = StepBranch::kPolicy;
      policy_steps_.fetch_add(1);
    }
    u = seq.input(0).cwiseMax(spec_.u_min).cwiseMin(spec_.u_max);
  }

  out.latency_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return u;
}

ClosedLoopRun closed_loop(const Eigen::VectorXd& x0, const PlmpcController& ctl,
                          const DynamicsModel& plant, int steps) {
  if (steps < 1) throw std::invalid_argument("closed_loop: steps must be >= 1");
  ClosedLoopRun run;
  run.records.reserve(steps);
  Eigen::VectorXd x = x0;
  for (int k = 0; k < steps; ++k) {
    ClosedLoopRecord rec;
    rec.state = x;
    try {
      rec.input = ctl.act(x, plant, &rec.info);
    } catch (const UnrecoverableStep& e) {
      throw UnrecoverableStep("closed_loop: step " + std::to_string(k) + ": " +
                              e.what());
    }
    rec.stage_cost = stage_cost(x, rec.input, ctl.spec());
    x = plant.step(x, rec.input);
    run.records.push_back(std::move(rec));
  }
  run.final_state = x;
  return run;
}

}  // namespace plmpc
