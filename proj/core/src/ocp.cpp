#include "plmpc/ocp.hpp"

#include <cmath>

#include <Eigen/Cholesky>

namespace plmpc {

namespace {

bool is_symmetric_psd(const Eigen::MatrixXd& M) {
  if (M.rows() != M.cols()) return false;
  double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) return false;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
  if (ldlt.info() != Eigen::Success) return false;
  return (ldlt.vectorD().array() >= -1e-10 * scale).all();
}

}  // namespace

void OcpSpec::validate() const {
  const int n = state_dim(), m = input_dim();
  if (horizon < 1) throw std::invalid_argument("OcpSpec: horizon must be >= 1");
  if (!is_symmetric_psd(Q) || !is_symmetric_psd(R) || !is_symmetric_psd(P) ||
      !is_symmetric_psd(terminal_shape))
    throw std::invalid_argument("OcpSpec: weights must be symmetric PSD");
  if (P.rows() != n || terminal_shape.rows() != n)
    throw std::invalid_argument("OcpSpec: terminal weight dimension mismatch");
  if (u_min.size() != m || u_max.size() != m)
    throw std::invalid_argument("OcpSpec: input box dimension mismatch");
  if (!((u_min.array() < u_max.array()).all()))
    throw std::invalid_argument("OcpSpec: need u_min < u_max componentwise");
  if (g_rows.rows() != g_rhs.size() || (g_rows.rows() > 0 && g_rows.cols() != n))
    throw std::invalid_argument("OcpSpec: state constraint dimension mismatch");
  if (!(gamma0 > 0.0 && gamma0 < 1.0))
    throw std::invalid_argument("OcpSpec: gamma0 must lie in (0, 1)");
  if (!(alpha > 0.0)) throw std::invalid_argument("OcpSpec: alpha must be > 0");
}

int OcpSpec::index_of(const ConstraintRef& ref) const {
  const int n_g = num_state_rows(), m = input_dim(), N = horizon;
  switch (ref.kind) {
    case ConstraintKind::State:
      return ref.stage * n_g + ref.row;
    case ConstraintKind::InputUpper:
      return N * n_g + ref.stage * m + ref.row;
    case ConstraintKind::InputLower:
      return N * n_g + N * m + ref.stage * m + ref.row;
  }
  throw std::logic_error("OcpSpec::index_of: bad kind");
}

ConstraintRef OcpSpec::decode(int index) const {
  const int n_g = num_state_rows(), m = input_dim(), N = horizon;
  if (index < 0 || index >= num_constraints())
    throw std::out_of_range("OcpSpec::decode: index out of range");
  if (index < N * n_g)
    return {ConstraintKind::State, index / n_g, index % n_g};
  index -= N * n_g;
  if (index < N * m)
    return {ConstraintKind::InputUpper, index / m, index % m};
  index -= N * m;
  return {ConstraintKind::InputLower, index / m, index % m};
}

void append_box_rows(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                     Eigen::MatrixXd& rows, Eigen::VectorXd& rhs) {
  const int n = static_cast<int>(lower.size());
  std::vector<std::pair<int, double>> entries;  // (signed index+1, bound)
  for (int i = 0; i < n; ++i) {
    if (std::isfinite(upper[i])) entries.push_back({i + 1, upper[i]});
    if (std::isfinite(lower[i])) entries.push_back({-(i + 1), -lower[i]});
  }
  rows = Eigen::MatrixXd::Zero(static_cast<int>(entries.size()), n);
  rhs = Eigen::VectorXd::Zero(static_cast<int>(entries.size()));
  for (int k = 0; k < static_cast<int>(entries.size()); ++k) {
    int idx = std::abs(entries[k].first) - 1;
    rows(k, idx) = entries[k].first > 0 ? 1.0 : -1.0;
    rhs[k] = entries[k].second;
  }
}

RolloutData rollout_data(const Eigen::VectorXd& x0, const ControlSequence& U,
                         const DynamicsModel& model, bool with_jacobians) {
  const int n = model.state_dim(), N = U.horizon;
  RolloutData out;
  out.states.resize(n, N + 1);
  out.states.col(0) = x0;
  if (with_jacobians) {
    out.A.assign(N, Eigen::MatrixXd());
    out.B.assign(N, Eigen::MatrixXd());
  }
  if (!x0.allFinite()) {
    out.diverged = true;
    out.diverged_stage = 0;
    return out;
  }
  for (int i = 0; i < N; ++i) {
    Eigen::VectorXd u = U.input(i);
    if (!u.allFinite()) {
      out.diverged = true;
      out.diverged_stage = i;
      return out;
    }
    Eigen::VectorXd next = model.step(out.states.col(i), u);
    if (!next.allFinite()) {
      out.diverged = true;
      out.diverged_stage = i + 1;
      return out;
    }
    out.states.col(i + 1) = next;
    if (with_jacobians) model.jacobians(out.states.col(i), u, out.A[i], out.B[i]);
  }
  return out;
}

Eigen::MatrixXd rollout(const Eigen::VectorXd& x0, const ControlSequence& U,
                        const DynamicsModel& model) {
  RolloutData data = rollout_data(x0, U, model, false);
  if (data.diverged)
    throw DivergedRollout("rollout diverged at stage " +
                          std::to_string(data.diverged_stage));
  return data.states;
}

double stage_cost(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                  const OcpSpec& spec) {
  return x.dot(spec.Q * x) + u.dot(spec.R * u);
}

double trajectory_cost(const RolloutData& roll, const ControlSequence& U,
                       const OcpSpec& spec) {
  const int N = U.horizon;
  double j = 0.0;
  for (int i = 0; i < N; ++i) {
    Eigen::VectorXd x = roll.states.col(i);
    Eigen::VectorXd u = U.input(i);
    j += x.dot(spec.Q * x) + u.dot(spec.R * u);
  }
  Eigen::VectorXd xN = roll.states.col(N);
  return j + xN.dot(spec.P * xN);
}

double cost(const Eigen::VectorXd& x0, const ControlSequence& U,
            const OcpSpec& spec, const DynamicsModel& model) {
  RolloutData data = rollout_data(x0, U, model, false);
  if (data.diverged)
    throw DivergedRollout("cost: rollout diverged at stage " +
                          std::to_string(data.diverged_stage));
  return trajectory_cost(data, U, spec);
}

Eigen::VectorXd stacked_constraints(const RolloutData& roll,
                                    const ControlSequence& U,
                                    const OcpSpec& spec) {
  const int N = spec.horizon, n_g = spec.num_state_rows(), m = spec.input_dim();
  Eigen::VectorXd g(spec.num_constraints());
  for (int i = 0; i < N; ++i)
    g.segment(static_cast<Eigen::Index>(i) * n_g, n_g) =
        spec.g_rows * roll.states.col(i) - spec.g_rhs;
  for (int i = 0; i < N; ++i) {
    Eigen::VectorXd u = U.input(i);
    g.segment(static_cast<Eigen::Index>(N) * n_g + static_cast<Eigen::Index>(i) * m, m) =
        u - spec.u_max;
    g.segment(static_cast<Eigen::Index>(N) * (n_g + m) + static_cast<Eigen::Index>(i) * m, m) =
        spec.u_min - u;
  }
  return g;
}

Eigen::VectorXd constraints(const Eigen::VectorXd& x0, const ControlSequence& U,
                            const OcpSpec& spec, const DynamicsModel& model) {
  RolloutData data = rollout_data(x0, U, model, false);
  if (data.diverged)
    throw DivergedRollout("constraints: rollout diverged at stage " +
                          std::to_string(data.diverged_stage));
  return stacked_constraints(data, U, spec);
}

bool in_terminal_set(const Eigen::VectorXd& x, const OcpSpec& spec) {
  return x.dot(spec.terminal_shape * x) <= spec.alpha;
}

bool in_inner_set(const Eigen::VectorXd& x, const OcpSpec& spec) {
  return x.dot(spec.terminal_shape * x) <= spec.gamma0 * spec.alpha;
}

Eigen::VectorXd ocp_gradient(const RolloutData& roll, const ControlSequence& U,
                             const OcpSpec& spec, double cost_weight,
                             const Eigen::VectorXd* row_weights) {
  const int N = spec.horizon, n_g = spec.num_state_rows(), m = spec.input_dim();
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(N) * m);

  // lambda_i = d(total)/dx_i holding later inputs fixed; swept backwards.
  Eigen::VectorXd lambda = 2.0 * cost_weight * (spec.P * roll.states.col(N));
  for (int i = N - 1; i >= 0; --i) {
    Eigen::VectorXd u = U.input(i);
    Eigen::VectorXd gu = 2.0 * cost_weight * (spec.R * u) + roll.B[i].transpose() * lambda;
    if (row_weights) {
      gu += row_weights->segment(static_cast<Eigen::Index>(N) * n_g +
                                 static_cast<Eigen::Index>(i) * m, m);
      gu -= row_weights->segment(static_cast<Eigen::Index>(N) * (n_g + m) +
                                 static_cast<Eigen::Index>(i) * m, m);
    }
    grad.segment(static_cast<Eigen::Index>(i) * m, m) = gu;

    lambda = 2.0 * cost_weight * (spec.Q * roll.states.col(i)) +
             roll.A[i].transpose() * lambda;
    if (row_weights && n_g > 0)
      lambda += spec.g_rows.transpose() *
                row_weights->segment(static_cast<Eigen::Index>(i) * n_g, n_g);
  }
  return grad;
}

Eigen::MatrixXd constraint_jacobian(const RolloutData& roll, const OcpSpec& spec) {
  const int N = spec.horizon, n_g = spec.num_state_rows(), m = spec.input_dim();
  const int n = spec.state_dim(), nz = N * m;
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(spec.num_constraints(), nz);

  // S_i = d phi(i) / dU, propagated forward one stage at a time.
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, nz);
  for (int i = 0; i < N; ++i) {
    if (n_g > 0 && i > 0)
      jac.block(static_cast<Eigen::Index>(i) * n_g, 0, n_g, nz).noalias() =
          spec.g_rows * S;
    // stage 0 state rows depend only on x0: zero Jacobian rows.
    S = roll.A[i] * S;
    S.block(0, static_cast<Eigen::Index>(i) * m, n, m) += roll.B[i];
  }
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < m; ++j) {
      jac(static_cast<Eigen::Index>(N) * n_g + static_cast<Eigen::Index>(i) * m + j,
          static_cast<Eigen::Index>(i) * m + j) = 1.0;
      jac(static_cast<Eigen::Index>(N) * (n_g + m) + static_cast<Eigen::Index>(i) * m + j,
          static_cast<Eigen::Index>(i) * m + j) = -1.0;
    }
  }
  return jac;
}

double terminal_row_value(const RolloutData& roll, const OcpSpec& spec) {
  Eigen::VectorXd xN = roll.states.col(spec.horizon);
  return xN.dot(spec.terminal_shape * xN) - spec.alpha;
}

Eigen::VectorXd terminal_row_gradient(const RolloutData& roll, const OcpSpec& spec) {
  const int N = spec.horizon, m = spec.input_dim();
  Eigen::VectorXd grad(static_cast<Eigen::Index>(N) * m);
  Eigen::VectorXd lambda = 2.0 * (spec.terminal_shape * roll.states.col(N));
  for (int i = N - 1; i >= 0; --i) {
    grad.segment(static_cast<Eigen::Index>(i) * m, m) = roll.B[i].transpose() * lambda;
    lambda = roll.A[i].transpose() * lambda;
  }
  return grad;
}

}  // namespace plmpc
