#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plmpc/dataset.hpp"
#include "plmpc/ocp.hpp"
#include "plmpc/policy.hpp"

namespace plmpc {

/// One nonnegative multiplier per stacked constraint row.
struct DualVars {
  Eigen::VectorXd v;

  explicit DualVars(int rows = 0) : v(Eigen::VectorXd::Zero(rows)) {}
  void validate() const {
    if (!(v.array() >= 0.0).all())
      throw std::invalid_argument("DualVars: multipliers must be nonnegative");
  }
};

struct TrainConfig {
  enum class Optimizer { kSgd, kAdam };

  double learning_rate = 1e-3;        ///< epsilon_lr
  Optimizer optimizer = Optimizer::kSgd;
  int batch_size = 128;
  double grad_norm_tolerance = 1e-4;  ///< inner-loop stop on the mean batch gradient
  int max_inner_steps = 400;          ///< per outer iteration
  double dual_step0 = 1e-3;           ///< alpha_0; applied as alpha_0/(1+j) per mean violation
  int outer_iterations = 10;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double solver_tolerance = 1e-6;     ///< labels are optimal only to this tolerance
  double loss_clamp_scale = 10.0;     ///< negatives within scale*tolerance clamp to 0

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double empirical_error = 0.0;
  double violation_mass = 0.0;  ///< sum of [G]+ over the dataset
  double grad_norm = 0.0;       ///< last inner-loop mean batch gradient norm
  double wall_time_s = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  long clamped_losses = 0;
  long inner_steps = 0;
  Eigen::VectorXd final_duals;
  bool aborted = false;
  std::string abort_reason;
};

/// L = J(x, U_theta) - J(x, U*); nonnegative up to solver tolerance.
double policy_loss(const Eigen::VectorXd& x, const ControlSequence& u_theta,
                   const ControlSequence& u_star, const OcpSpec& spec,
                   const DynamicsModel& model);

/// policy_loss + v' [G(x, U_theta)]+.
double augmented_loss(const Eigen::VectorXd& x, const ControlSequence& u_theta,
                      const ControlSequence& u_star, const DualVars& duals,
                      const OcpSpec& spec, const DynamicsModel& model);

/// Alternates minibatch descent on the mean augmented loss with dual ascent
/// on the constraint violations over the whole buffer. The policy network is
/// updated in place. Bit-reproducible for a fixed seed.
TrainReport train(DataBuffer& buffer, PolicyModel& policy, const OcpSpec& spec,
                  const DynamicsModel& model, const TrainConfig& cfg);

/// (1/M) sum_k (J(x_k, U_theta) - J(x_k, U*_k)).
double empirical_error(const std::vector<TrainingSample>& samples,
                       const PolicyModel& policy, const OcpSpec& spec,
                       const DynamicsModel& model);

/// Raised when the probability bound of stability_bound is undefined.
class UndefinedBound : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct BoundInputs {
  double empirical_error = 0.0;  ///< R_emp >= 0
  double sample_count = 0.0;     ///< M
  double delta = 0.01;           ///< in (0, 1]
  double c = 2.0;                ///< >= 1
  double epsilon = 0.05;         ///< loss threshold, > 0
};

/// P{L < eps} >= 1 - R_emp / ((1 - sqrt((c-1)/(M delta))) eps), clamped above
/// by 1. May be nonpositive (vacuous). Throws UndefinedBound when
/// M delta <= c - 1.
double stability_bound(const BoundInputs& inputs);

}  // namespace plmpc
