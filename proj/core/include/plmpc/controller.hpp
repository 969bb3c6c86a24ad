#pragma once

#include <atomic>
#include <cstdint>
#include <vector>

#include "plmpc/guard.hpp"
#include "plmpc/ocp.hpp"
#include "plmpc/policy.hpp"
#include "plmpc/terminal.hpp"

namespace plmpc {

enum class StepBranch : std::uint8_t {
  kKappa = 0,        ///< terminal law inside the inner region (or guard fallback)
  kPolicy = 1,       ///< raw network output, already feasible
  kPolicyGuarded = 2 ///< network output after penalty projection
};

const char* to_string(StepBranch branch);

struct StepInfo {
  StepBranch branch = StepBranch::kKappa;
  double latency_s = 0.0;
  double violation_before = 0.0;
  double violation_after = 0.0;
};

/// Raised when the guard fails outside the terminal set; applying an
/// infeasible input silently is not an option.
class UnrecoverableStep : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Online policy: terminal law kappa inside the inner region, otherwise
/// network inference plus the feasibility guard. act() is read-only over the
/// policy/spec/law and safe for concurrent simulations; counters are atomic.
class PlmpcController {
 public:
  PlmpcController(PolicyModel policy, OcpSpec spec, TerminalLaw law,
                  GuardConfig guard);

  Eigen::VectorXd act(const Eigen::VectorXd& x, const DynamicsModel& model,
                      StepInfo* info = nullptr) const;

  const PolicyModel& policy() const { return policy_; }
  const OcpSpec& spec() const { return spec_; }
  const TerminalLaw& law() const { return law_; }
  const GuardConfig& guard() const { return guard_; }

  long kappa_steps() const { return kappa_steps_.load(); }
  long policy_steps() const { return policy_steps_.load(); }
  long guard_steps() const { return guard_steps_.load(); }
  long guard_fallbacks() const { return guard_fallbacks_.load(); }

 private:
  PolicyModel policy_;
  OcpSpec spec_;
  TerminalLaw law_;
  GuardConfig guard_;
  mutable std::atomic<long> kappa_steps_{0};
  mutable std::atomic<long> policy_steps_{0};
  mutable std::atomic<long> guard_steps_{0};
  mutable std::atomic<long> guard_fallbacks_{0};
};

struct ClosedLoopRecord {
  Eigen::VectorXd state;
  Eigen::VectorXd input;
  StepInfo info;
  double stage_cost = 0.0;
};

struct ClosedLoopRun {
  std::vector<ClosedLoopRecord> records;
  Eigen::VectorXd final_state;
};

/// Iterates act -> plant step. Errors propagate wrapped with the step index.
ClosedLoopRun closed_loop(const Eigen::VectorXd& x0, const PlmpcController& ctl,
                          const DynamicsModel& plant, int steps);

}  // namespace plmpc
