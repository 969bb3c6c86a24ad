#include "plmpc/solver.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "plmpc/qp.hpp"

namespace plmpc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Evaluation {
  double cost = kInf;
  Eigen::VectorXd cost_grad;
  Eigen::VectorXd c;        // stacked rows plus optional terminal row
  Eigen::MatrixXd jac;      // d c / dU
  bool diverged = false;
  double max_violation() const { return c.size() ? c.maxCoeff() : 0.0; }
};

// Values only (for line-search trials).
bool eval_values(const Eigen::VectorXd& x0, const Eigen::VectorXd& z,
                 const OcpSpec& spec, const DynamicsModel& model, double& cost_out,
                 Eigen::VectorXd& c_out) {
  ControlSequence U = ControlSequence::from_stacked(spec.horizon, spec.input_dim(), z);
  RolloutData roll = rollout_data(x0, U, model, false);
  if (roll.diverged) return false;
  cost_out = trajectory_cost(roll, U, spec);
  c_out = stacked_constraints(roll, U, spec);
  if (spec.terminal_constraint) {
    c_out.conservativeResize(c_out.size() + 1);
    c_out[c_out.size() - 1] = terminal_row_value(roll, spec);
  }
  return true;
}

Evaluation evaluate(const Eigen::VectorXd& x0, const Eigen::VectorXd& z,
                    const OcpSpec& spec, const DynamicsModel& model) {
  Evaluation ev;
  ControlSequence U = ControlSequence::from_stacked(spec.horizon, spec.input_dim(), z);
  RolloutData roll = rollout_data(x0, U, model, true);
  if (roll.diverged) {
    ev.diverged = true;
    return ev;
  }
  ev.cost = trajectory_cost(roll, U, spec);
  ev.cost_grad = ocp_gradient(roll, U, spec, 1.0, nullptr);
  ev.c = stacked_constraints(roll, U, spec);
  ev.jac = constraint_jacobian(roll, spec);
  if (spec.terminal_constraint) {
    Eigen::Index rows = ev.c.size();
    ev.c.conservativeResize(rows + 1);
    ev.c[rows] = terminal_row_value(roll, spec);
    ev.jac.conservativeResize(rows + 1, Eigen::NoChange);
    ev.jac.row(rows) = terminal_row_gradient(roll, spec).transpose();
  }
  return ev;
}

// Gauss-Newton model of the cost Hessian, 2 (sum_i S_i'QS_i + R~ + S_N'PS_N).
Eigen::MatrixXd gauss_newton_hessian(const Eigen::VectorXd& x0,
                                     const Eigen::VectorXd& z, const OcpSpec& spec,
                                     const DynamicsModel& model) {
  const int N = spec.horizon, m = spec.input_dim(), n = spec.state_dim();
  const int nz = N * m;
  ControlSequence U = ControlSequence::from_stacked(N, m, z);
  RolloutData roll = rollout_data(x0, U, model, true);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(nz, nz);
  for (int i = 0; i < N; ++i)
    H.block(static_cast<Eigen::Index>(i) * m, static_cast<Eigen::Index>(i) * m, m, m) =
        2.0 * spec.R;
  if (roll.diverged) {
    H.diagonal().array() += 1e-6;
    return H;
  }
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, nz);
  for (int i = 0; i < N; ++i) {
    if (i > 0) H.noalias() += 2.0 * S.transpose() * spec.Q * S;
    S = roll.A[i] * S;
    S.block(0, static_cast<Eigen::Index>(i) * m, n, m) += roll.B[i];
  }
  H.noalias() += 2.0 * S.transpose() * spec.P * S;
  H = 0.5 * (H + H.transpose());
  H.diagonal().array() += 1e-9 * std::max(1.0, H.diagonal().maxCoeff());
  return H;
}

double merit(double cost, const Eigen::VectorXd& c, double sigma) {
  return cost + sigma * c.cwiseMax(0.0).sum();
}

// Violation-minimization pre-phase: Gauss-Newton steps on 1/2 ||[c]+||^2.
void prephase(const Eigen::VectorXd& x0, Eigen::VectorXd& z, const OcpSpec& spec,
              const DynamicsModel& model, const SolverConfig& cfg) {
  for (int it = 0; it < cfg.prephase_max_iterations; ++it) {
    Evaluation ev = evaluate(x0, z, spec, model);
    if (ev.diverged) {
      z.setZero();
      continue;
    }
    Eigen::VectorXd viol = ev.c.cwiseMax(0.0);
    double value = 0.5 * viol.squaredNorm();
    if (ev.max_violation() <= cfg.constraint_tolerance) return;

    Eigen::VectorXd grad = ev.jac.transpose() * viol;
    Eigen::MatrixXd JtJ = ev.jac.transpose() * viol.cwiseSign().asDiagonal() * ev.jac;
    JtJ = 0.5 * (JtJ + JtJ.transpose());
    JtJ.diagonal().array() += 1e-8 + 1e-8 * JtJ.diagonal().cwiseAbs().maxCoeff();
    Eigen::VectorXd d = JtJ.ldlt().solve(-grad);
    if (!d.allFinite() || grad.norm() < 1e-14) return;

    double t = 1.0;
    bool accepted = false;
    while (t >= cfg.min_step) {
      double trial_cost;
      Eigen::VectorXd trial_c;
      if (eval_values(x0, z + t * d, spec, model, trial_cost, trial_c)) {
        double trial_value = 0.5 * trial_c.cwiseMax(0.0).squaredNorm();
        if (trial_value <= value - cfg.armijo_c * t * grad.dot(-d)) {
          z += t * d;
          accepted = true;
          break;
        }
      }
      t *= cfg.backtrack_factor;
    }
    if (!accepted) return;
  }
}

}  // namespace

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kMaxIterations: return "max_iter";
    case SolveStatus::kInfeasible: return "infeasible";
  }
  return "unknown";
}

void SolverConfig::validate() const {
  if (max_iterations < 1 || kkt_tolerance <= 0.0 || constraint_tolerance <= 0.0 ||
      !(backtrack_factor > 0.0 && backtrack_factor < 1.0) || min_step <= 0.0)
    throw std::invalid_argument("SolverConfig: bad parameters");
}

SolveResult solve_ocp(const Eigen::VectorXd& x0, const OcpSpec& spec,
                      const DynamicsModel& model, const SolverConfig& cfg,
                      const ControlSequence* warm_start) {
  const auto t_begin = std::chrono::steady_clock::now();
  cfg.validate();
  if (!x0.allFinite())
    throw std::invalid_argument("solve_ocp: non-finite initial state");
  const int N = spec.horizon, m = spec.input_dim();
  const Eigen::Index nz = static_cast<Eigen::Index>(N) * m;
  if (warm_start && (warm_start->horizon != N || warm_start->input_dim != m))
    throw std::invalid_argument("solve_ocp: warm start dimension mismatch");

  Eigen::VectorXd z =
      warm_start ? warm_start->stacked : Eigen::VectorXd::Zero(nz);

  {
    double c0;
    Eigen::VectorXd cv;
    if (!eval_values(x0, z, spec, model, c0, cv)) z.setZero();
    else if (cv.maxCoeff() > 1e3 * cfg.constraint_tolerance)
      prephase(x0, z, spec, model, cfg);
  }

  Eigen::MatrixXd H = gauss_newton_hessian(x0, z, spec, model);
  Evaluation ev = evaluate(x0, z, spec, model);
  if (ev.diverged) {
    z.setZero();
    ev = evaluate(x0, z, spec, model);
  }
  const Eigen::Index nc = ev.c.size();
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(nc);
  double sigma = cfg.merit_penalty;

  SolveResult result;
  result.control = ControlSequence::from_stacked(N, m, z);
  result.cost = ev.cost;
  result.kkt_residual = kInf;
  result.max_violation = ev.max_violation();

  Eigen::VectorXd best_z = z;
  double best_violation = ev.max_violation();
  double best_cost = ev.cost;

  int it = 0;
  for (; it < cfg.max_iterations; ++it) {
    // KKT residual with current multipliers.
    Eigen::VectorXd stat = ev.cost_grad + ev.jac.transpose() * lambda;
    double comp = 0.0;
    for (Eigen::Index i = 0; i < nc; ++i)
      comp = std::max(comp, std::abs(lambda[i] * ev.c[i]));
    double lam_scale = 1.0 + (nc ? lambda.cwiseAbs().maxCoeff() : 0.0);
    double kkt = std::max(stat.cwiseAbs().maxCoeff(), comp / lam_scale);
    double violation = ev.max_violation();

    result.kkt_residual = kkt;
    result.max_violation = violation;
    if (violation <= cfg.constraint_tolerance && kkt <= cfg.kkt_tolerance) {
      result.status = SolveStatus::kOptimal;
      break;
    }

    // QP subproblem: min 1/2 d'Hd + g'd  s.t.  Jc d <= -c. Rows that cannot
    // activate at any sensible step length are left out.
    std::vector<Eigen::Index> keep;
    keep.reserve(nc);
    for (Eigen::Index i = 0; i < nc; ++i) {
      double rs = std::max(1.0, ev.jac.row(i).cwiseAbs().maxCoeff());
      if (-ev.c[i] <= 1e7 * rs) keep.push_back(i);
    }
    QpResult qp;
    Eigen::VectorXd lambda_qp = Eigen::VectorXd::Zero(nc);
    if (keep.size() == static_cast<std::size_t>(nc)) {
      qp = solve_qp(H, ev.cost_grad, ev.jac, -ev.c, cfg.qp_max_iterations);
      if (qp.multipliers.size() == nc) lambda_qp = qp.multipliers;
    } else {
      Eigen::MatrixXd Ak(static_cast<Eigen::Index>(keep.size()), ev.jac.cols());
      Eigen::VectorXd bk(static_cast<Eigen::Index>(keep.size()));
      for (std::size_t r = 0; r < keep.size(); ++r) {
        Ak.row(static_cast<Eigen::Index>(r)) = ev.jac.row(keep[r]);
        bk[static_cast<Eigen::Index>(r)] = -ev.c[keep[r]];
      }
      qp = solve_qp(H, ev.cost_grad, Ak, bk, cfg.qp_max_iterations);
      if (qp.multipliers.size() == static_cast<Eigen::Index>(keep.size()))
        for (std::size_t r = 0; r < keep.size(); ++r)
          lambda_qp[keep[r]] = qp.multipliers[static_cast<Eigen::Index>(r)];
    }
    Eigen::VectorXd d = qp.x;
    if (!qp.solved || !d.allFinite()) {
      // Inconsistent linearization: fall back to a violation-reduction step.
      Eigen::VectorXd viol = ev.c.cwiseMax(0.0);
      d = -ev.jac.transpose() * viol;
      double dn = d.norm();
      if (dn < 1e-14) {
        result.status = violation > cfg.constraint_tolerance
                            ? SolveStatus::kInfeasible
                            : SolveStatus::kMaxIterations;
        break;
      }
      d *= std::min(1.0, 1.0 / dn);
      lambda_qp.setZero();
    }

    double lam_inf = nc ? lambda_qp.cwiseAbs().maxCoeff() : 0.0;
    sigma = std::max(sigma, 1.1 * lam_inf + 0.1);

    double phi0 = merit(ev.cost, ev.c, sigma);
    double viol_l1 = ev.c.cwiseMax(0.0).sum();
    double descent = ev.cost_grad.dot(d) - sigma * viol_l1;
    if (descent > 0.0) descent = -1e-16;

    double t = 1.0;
    double trial_cost = 0.0;
    Eigen::VectorXd trial_c;
    bool accepted = false;
    while (t >= cfg.min_step) {
      if (eval_values(x0, z + t * d, spec, model, trial_cost, trial_c)) {
        if (merit(trial_cost, trial_c, sigma) <= phi0 + cfg.armijo_c * t * descent) {
          accepted = true;
          break;
        }
      }
      t *= cfg.backtrack_factor;
    }
    if (!accepted) {
      result.status = violation > cfg.constraint_tolerance ? SolveStatus::kInfeasible
                                                           : SolveStatus::kMaxIterations;
      break;
    }

    Eigen::VectorXd z_new = z + t * d;
    Evaluation ev_new = evaluate(x0, z_new, spec, model);
    if (ev_new.diverged) {
      result.status = SolveStatus::kMaxIterations;
      break;
    }

    // Damped BFGS update on the Lagrangian gradient difference.
    Eigen::VectorXd s = z_new - z;
    Eigen::VectorXd y = (ev_new.cost_grad + ev_new.jac.transpose() * lambda_qp) -
                        (ev.cost_grad + ev.jac.transpose() * lambda_qp);
    Eigen::VectorXd Hs = H * s;
    double sHs = s.dot(Hs);
    double sy = s.dot(y);
    if (sHs > 1e-16) {
      if (sy < cfg.bfgs_damping * sHs) {
        double theta = (1.0 - cfg.bfgs_damping) * sHs / (sHs - sy);
        y = theta * y + (1.0 - theta) * Hs;
        sy = s.dot(y);
      }
      if (sy > 1e-14 * sHs) {
        H.noalias() -= (Hs * Hs.transpose()) / sHs;
        H.noalias() += (y * y.transpose()) / sy;
        H = 0.5 * (H + H.transpose());
      }
    }

    z = z_new;
    ev = ev_new;
    lambda = lambda_qp;

    double v = ev.max_violation();
    if (v < best_violation - 1e-15 ||
        (v <= std::max(best_violation, cfg.constraint_tolerance) && ev.cost < best_cost)) {
      best_z = z;
      best_violation = v;
      best_cost = ev.cost;
    }
  }

  if (it == cfg.max_iterations) result.status = SolveStatus::kMaxIterations;

  if (result.status == SolveStatus::kOptimal) {
    result.control = ControlSequence::from_stacked(N, m, z);
    result.cost = ev.cost;
  } else {
    // Report the best-found iterate.
    double c_best;
    Eigen::VectorXd cv_best;
    if (eval_values(x0, best_z, spec, model, c_best, cv_best)) {
      result.control = ControlSequence::from_stacked(N, m, best_z);
      result.cost = c_best;
      result.max_violation = cv_best.maxCoeff();
    }
    if (result.max_violation > cfg.constraint_tolerance &&
        result.status == SolveStatus::kMaxIterations)
      result.status = SolveStatus::kInfeasible;
  }
  result.iterations = it;
  result.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin)
          .count();
  return result;
}

bool probe_feasible(const Eigen::VectorXd& x0, const OcpSpec& spec,
                    const DynamicsModel& model, const SolverConfig& cfg) {
  if (!x0.allFinite()) return false;
  Eigen::VectorXd z =
      Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.horizon) * spec.input_dim());
  double c0;
  Eigen::VectorXd cv;
  if (!eval_values(x0, z, spec, model, c0, cv)) return false;
  if (cv.maxCoeff() <= cfg.constraint_tolerance) return true;
  prephase(x0, z, spec, model, cfg);
  if (!eval_values(x0, z, spec, model, c0, cv)) return false;
  return cv.maxCoeff() <= cfg.constraint_tolerance;
}

RecedingHorizonRun receding_horizon_run(const Eigen::VectorXd& x0,
                                        const OcpSpec& spec,
                                        const DynamicsModel& model,
                                        const SolverConfig& cfg, int steps,
                                        const TerminalLaw* law) {
  if (steps < 1)
    throw std::invalid_argument("receding_horizon_run: steps must be >= 1");
  const int N = spec.horizon, m = spec.input_dim();

  RecedingHorizonRun run;
  run.steps.reserve(steps);
  Eigen::VectorXd x = x0;
  std::optional<ControlSequence> warm;

  for (int k = 0; k < steps; ++k) {
    double warm_cost = std::numeric_limits<double>::quiet_NaN();
    if (warm) {
      try {
        warm_cost = cost(x, *warm, spec, model);
      } catch (const DivergedRollout&) {
        warm.reset();
      }
    }
    SolveResult res = solve_ocp(x, spec, model, cfg,
                                cfg.warm_start && warm ? &*warm : nullptr);
    if (res.status != SolveStatus::kOptimal)
      throw SolverFailure(k, res.status,
                          "receding_horizon_run: solve failed at step " +
                              std::to_string(k) + " (" + to_string(res.status) + ")");

    RecedingHorizonStep rec;
    rec.state = x;
    rec.input = res.control.input(0);
    rec.stage_cost = stage_cost(x, rec.input, spec);
    rec.optimal_cost = res.cost;
    rec.warm_start_cost = warm_cost;
    rec.solve_time_s = res.wall_time_s;
    rec.iterations = res.iterations;
    run.steps.push_back(std::move(rec));

    // Shift the solution; append kappa of the predicted terminal state.
    Eigen::MatrixXd predicted = rollout(x, res.control, model);
    ControlSequence shifted(N, m);
    for (int i = 0; i + 1 < N; ++i) shifted.set_input(i, res.control.input(i + 1));
    if (law) {
      shifted.set_input(N - 1, terminal_law_input(predicted.col(N), *law,
                                                  spec.u_min, spec.u_max));
    } else if (N > 1) {
      shifted.set_input(N - 1, res.control.input(N - 1));
    }
    warm = std::move(shifted);

    x = model.step(x, run.steps.back().input);
  }
  run.final_state = x;
  return run;
}

}  // namespace plmpc
