#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "plmpc/dynamics.hpp"
#include "plmpc/ocp.hpp"

namespace plmpc {

/// Local stabilizing feedback kappa(x) = clamp(-K x) and the quadratic weight
/// used both by the terminal value function and the terminal-set shape.
struct TerminalLaw {
  Eigen::MatrixXd gain;    ///< K, m x n
  Eigen::MatrixXd weight;  ///< P, n x n positive definite
};

/// kappa(x) = -K x saturated to [u_min, u_max].
Eigen::VectorXd terminal_law_input(const Eigen::VectorXd& x, const TerminalLaw& law,
                                   const Eigen::VectorXd& u_min,
                                   const Eigen::VectorXd& u_max);

/// Solves A'PA - P - A'PB (R + B'PB)^{-1} B'PA + Q = 0 by the
/// structure-preserving doubling iteration. Requires Q PSD, R PD, (A, B)
/// stabilizable.
Eigen::MatrixXd solve_dare(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                           const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                           double tolerance = 1e-13, int max_iterations = 200);

/// K = (R + B'PB)^{-1} B'PA.
Eigen::MatrixXd dlqr_gain(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                          const Eigen::MatrixXd& P, const Eigen::MatrixXd& R);

/// Solves A' P A - P = -W exactly (Kronecker form). A must be Schur stable.
Eigen::MatrixXd solve_discrete_lyapunov(const Eigen::MatrixXd& A,
                                        const Eigen::MatrixXd& W);

/// LQR law from the linearization of the model at the origin.
///
/// `damping` shrinks A to (1 - damping) A before the Riccati solve; a small
/// positive value makes the equation well posed when the linearization
/// carries uncontrollable marginal modes (an underactuated vehicle at rest
/// has one).
///
/// `margin` > 1 replaces the Riccati weight by the Lyapunov solution for the
/// closed loop with the stage cost inflated by that factor. The linearized
/// decrease then holds with (margin - 1) x stage-cost slack, which is what
/// absorbs the nonlinear remainder on a small terminal set.
TerminalLaw make_lqr_terminal_law(const DynamicsModel& model,
                                  const Eigen::MatrixXd& Q,
                                  const Eigen::MatrixXd& R,
                                  double damping = 0.0, double margin = 1.0);

/// Monte-Carlo check of the terminal decrease condition
///   V_f(f(x, kappa(x))) - V_f(x) + x'Qx + kappa(x)'R kappa(x) <= 0
/// over points sampled uniformly in {x : x' terminal_shape x <= alpha}.
struct TerminalValidation {
  double max_violation = 0.0;          ///< worst decrease residual; <= 0 passes
  double fraction_ok = 1.0;            ///< fraction of samples with residual <= 0
  double largest_passing_alpha = 0.0;  ///< sup level below which all samples pass
  int samples = 0;
};

TerminalValidation validate_terminal(const OcpSpec& spec, const TerminalLaw& law,
                                     const DynamicsModel& model, int n_samples,
                                     std::uint64_t seed = 0x7e51a11cULL,
                                     double pass_tolerance = 0.0);

/// Largest alpha keeping {x' S x <= alpha} inside the affine state set.
double max_level_inside_constraints(const OcpSpec& spec, const Eigen::MatrixXd& shape);

/// Calibrates spec.alpha: starts from the geometric bound, repeatedly shrinks
/// to 0.9x the largest passing level until a fresh validation run shows no
/// residual above pass_tolerance. Returns the final level (also written into
/// spec.alpha).
double calibrate_terminal_level(OcpSpec& spec, const TerminalLaw& law,
                                const DynamicsModel& model, int n_samples = 20000,
                                std::uint64_t seed = 0x7e51a11cULL,
                                double pass_tolerance = 0.0);

}  // namespace plmpc
