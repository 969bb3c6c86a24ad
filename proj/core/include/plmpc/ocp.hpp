#pragma once

#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "plmpc/dynamics.hpp"

namespace plmpc {

/// Thrown when a predicted trajectory leaves the representable range.
class DivergedRollout : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Stacked control sequence U = [u_0; u_1; ...; u_{N-1}].
struct ControlSequence {
  int horizon = 0;
  int input_dim = 0;
  Eigen::VectorXd stacked;

  ControlSequence() = default;
  ControlSequence(int N, int m)
      : horizon(N), input_dim(m), stacked(Eigen::VectorXd::Zero(N * m)) {}

  static ControlSequence from_stacked(int N, int m, Eigen::VectorXd values) {
    if (values.size() != static_cast<Eigen::Index>(N) * m)
      throw std::invalid_argument("ControlSequence: stacked size mismatch");
    ControlSequence seq;
    seq.horizon = N;
    seq.input_dim = m;
    seq.stacked = std::move(values);
    return seq;
  }

  Eigen::VectorXd input(int i) const {
    return stacked.segment(static_cast<Eigen::Index>(i) * input_dim, input_dim);
  }
  void set_input(int i, const Eigen::VectorXd& u) {
    stacked.segment(static_cast<Eigen::Index>(i) * input_dim, input_dim) = u;
  }
};

/// Position of a row inside the stacked constraint vector. Rows are ordered
/// as: all state rows stage by stage, then all input upper-bound rows, then
/// all input lower-bound rows.
enum class ConstraintKind { State, InputUpper, InputLower };

struct ConstraintRef {
  ConstraintKind kind;
  int stage;  ///< 0..N-1
  int row;    ///< row within the stage block
};

/// Weights, horizon, and constraint sets of the finite-horizon OCP.
///
/// State constraints are affine: g(x) = g_rows * x - g_rhs <= 0. The terminal
/// set is the sublevel set {x : x' terminal_shape x <= alpha}; the inner
/// region shrinks the level to gamma0 * alpha. P weighs the terminal cost
/// term and may differ from terminal_shape (the certified quadratic form).
struct OcpSpec {
  Eigen::MatrixXd Q;  ///< stage state weight, n x n PSD
  Eigen::MatrixXd R;  ///< stage input weight, m x m PSD
  Eigen::MatrixXd P;  ///< terminal cost weight, n x n PSD
  int horizon = 1;    ///< N >= 1

  Eigen::MatrixXd g_rows;  ///< n_g x n
  Eigen::VectorXd g_rhs;   ///< n_g
  Eigen::VectorXd u_min;   ///< m
  Eigen::VectorXd u_max;   ///< m

  Eigen::MatrixXd terminal_shape;   ///< n x n PSD quadratic form of X_f
  double alpha = 1.0;               ///< terminal level, > 0
  double gamma0 = 0.9;              ///< inner-region factor, in (0, 1)
  bool terminal_constraint = false; ///< append the terminal row to the OCP

  int state_dim() const { return static_cast<int>(Q.rows()); }
  int input_dim() const { return static_cast<int>(R.rows()); }
  int num_state_rows() const { return static_cast<int>(g_rows.rows()); }
  int num_constraints() const {
    return horizon * (num_state_rows() + 2 * input_dim());
  }

  /// Throws std::invalid_argument on any violated structural invariant.
  void validate() const;

  int index_of(const ConstraintRef& ref) const;
  ConstraintRef decode(int index) const;
};

/// Builds affine rows for a componentwise box, skipping infinite bounds.
void append_box_rows(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                     Eigen::MatrixXd& rows, Eigen::VectorXd& rhs);

/// States of the rollout plus per-stage Jacobians of the dynamics.
/// Non-throwing: `diverged` marks the first non-finite stage instead.
struct RolloutData {
  Eigen::MatrixXd states;         ///< n x (N+1)
  std::vector<Eigen::MatrixXd> A; ///< df/dx at stage i (empty unless requested)
  std::vector<Eigen::MatrixXd> B; ///< df/du at stage i
  bool diverged = false;
  int diverged_stage = -1;
};

RolloutData rollout_data(const Eigen::VectorXd& x0, const ControlSequence& U,
                         const DynamicsModel& model, bool with_jacobians);

/// phi(0..N): x0 followed by the composed dynamics map along U.
/// Throws DivergedRollout if any intermediate state is non-finite.
Eigen::MatrixXd rollout(const Eigen::VectorXd& x0, const ControlSequence& U,
                        const DynamicsModel& model);

/// Stage cost x'Qx + u'Ru.
double stage_cost(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                  const OcpSpec& spec);

/// J = sum_i (x_i'Qx_i + u_i'Ru_i) + x_N'Px_N along the rollout from x0.
double cost(const Eigen::VectorXd& x0, const ControlSequence& U,
            const OcpSpec& spec, const DynamicsModel& model);

/// Stacked constraint values; every entry <= 0 means feasible.
Eigen::VectorXd constraints(const Eigen::VectorXd& x0, const ControlSequence& U,
                            const OcpSpec& spec, const DynamicsModel& model);

bool in_terminal_set(const Eigen::VectorXd& x, const OcpSpec& spec);
bool in_inner_set(const Eigen::VectorXd& x, const OcpSpec& spec);

/// Cost along precomputed states.
double trajectory_cost(const RolloutData& roll, const ControlSequence& U,
                       const OcpSpec& spec);

/// Stacked constraint values along precomputed states.
Eigen::VectorXd stacked_constraints(const RolloutData& roll,
                                    const ControlSequence& U,
                                    const OcpSpec& spec);

/// Adjoint-mode gradient d/dU of (cost_weight * J + row_weights' G).
/// row_weights may be null (pure cost gradient). Requires Jacobians in roll.
Eigen::VectorXd ocp_gradient(const RolloutData& roll, const ControlSequence& U,
                             const OcpSpec& spec, double cost_weight,
                             const Eigen::VectorXd* row_weights);

/// Dense dG/dU via forward sensitivity propagation. Requires Jacobians.
Eigen::MatrixXd constraint_jacobian(const RolloutData& roll, const OcpSpec& spec);

/// Terminal sublevel row value x_N' S x_N - alpha and its gradient w.r.t. U.
double terminal_row_value(const RolloutData& roll, const OcpSpec& spec);
Eigen::VectorXd terminal_row_gradient(const RolloutData& roll, const OcpSpec& spec);

}  // namespace plmpc
