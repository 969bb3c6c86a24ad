#include "plmpc/terminal.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/LU>

namespace plmpc {

namespace {

// Uniform double in [-1, 1) from the raw 64-bit stream; identical on every
// platform, unlike std::uniform_real_distribution.
double unit_uniform(std::mt19937_64& rng) {
  return 2.0 * ((rng() >> 11) * 0x1.0p-53) - 1.0;
}

}  // namespace

Eigen::VectorXd terminal_law_input(const Eigen::VectorXd& x, const TerminalLaw& law,
                                   const Eigen::VectorXd& u_min,
                                   const Eigen::VectorXd& u_max) {
  Eigen::VectorXd u = -(law.gain * x);
  return u.cwiseMax(u_min).cwiseMin(u_max);
}

Eigen::MatrixXd solve_dare(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                           const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                           double tolerance, int max_iterations) {
  const int n = static_cast<int>(A.rows());
  Eigen::LLT<Eigen::MatrixXd> r_llt(R);
  if (r_llt.info() != Eigen::Success)
    throw std::invalid_argument("solve_dare: R must be positive definite");

  Eigen::MatrixXd Ak = A;
  Eigen::MatrixXd G = B * r_llt.solve(B.transpose());
  Eigen::MatrixXd H = Q;

  for (int it = 0; it < max_iterations; ++it) {
    Eigen::MatrixXd W = Eigen::MatrixXd::Identity(n, n) + G * H;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(W);
    Eigen::MatrixXd V1 = lu.solve(Ak);
    Eigen::MatrixXd V2 = lu.solve(G.transpose()).transpose();
    G += Ak * V2 * Ak.transpose();
    Eigen::MatrixXd H_next = H + V1.transpose() * H * Ak;
    Ak *= V1;
    double diff = (H_next - H).cwiseAbs().maxCoeff();
    H = H_next;
    if (diff <= tolerance * std::max(1.0, H.cwiseAbs().maxCoeff()))
      return 0.5 * (H + H.transpose());
  }
  throw std::runtime_error("solve_dare: no convergence");
}

Eigen::MatrixXd dlqr_gain(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                          const Eigen::MatrixXd& P, const Eigen::MatrixXd& R) {
  Eigen::MatrixXd S = R + B.transpose() * P * B;
  return S.llt().solve(B.transpose() * P * A);
}

TerminalLaw make_lqr_terminal_law(const DynamicsModel& model,
                                  const Eigen::MatrixXd& Q,
                                  const Eigen::MatrixXd& R, double damping) {
  if (!(damping >= 0.0 && damping < 1.0))
    throw std::invalid_argument("make_lqr_terminal_law: damping must lie in [0, 1)");
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(model.state_dim());
  Eigen::VectorXd u0 = Eigen::VectorXd::Zero(model.input_dim());
  Eigen::MatrixXd A, B;
  model.jacobians(x0, u0, A, B);
  if (damping > 0.0) A *= 1.0 - damping;
  TerminalLaw law;
  law.weight = solve_dare(A, B, Q, R);
  law.gain = dlqr_gain(A, B, law.weight, R);
  return law;
}

TerminalValidation validate_terminal(const OcpSpec& spec, const TerminalLaw& law,
                                     const DynamicsModel& model, int n_samples,
                                     std::uint64_t seed, double pass_tolerance) {
  if (n_samples < 1)
    throw std::invalid_argument("validate_terminal: need n_samples >= 1");
  const int n = spec.state_dim();
  const Eigen::MatrixXd& S = spec.terminal_shape;
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("validate_terminal: terminal shape must be PD");
  // x = sqrt(alpha) L^{-T} z maps the unit ball onto the sublevel set.
  Eigen::MatrixXd Lt = llt.matrixL().transpose();

  std::mt19937_64 rng(seed);
  TerminalValidation report;
  report.samples = n_samples;
  report.largest_passing_alpha = spec.alpha;
  report.max_violation = -std::numeric_limits<double>::infinity();
  int ok = 0;

  Eigen::VectorXd z(n);
  for (int s = 0; s < n_samples; ++s) {
    // Rejection sampling in the quadratic-form coordinates.
    do {
      for (int i = 0; i < n; ++i) z[i] = unit_uniform(rng);
    } while (z.squaredNorm() > 1.0);
    Eigen::VectorXd x =
        std::sqrt(spec.alpha) * Lt.triangularView<Eigen::Upper>().solve(z);

    Eigen::VectorXd kx = terminal_law_input(x, law, spec.u_min, spec.u_max);
    Eigen::VectorXd xn = model.step(x, kx);
    double residual = xn.dot(law.weight * xn) - x.dot(law.weight * x) +
                      x.dot(spec.Q * x) + kx.dot(spec.R * kx);
    report.max_violation = std::max(report.max_violation, residual);
    if (residual <= pass_tolerance) {
      ++ok;
    } else {
      report.largest_passing_alpha =
          std::min(report.largest_passing_alpha, x.dot(S * x));
    }
  }
  report.fraction_ok = static_cast<double>(ok) / n_samples;
  return report;
}

double max_level_inside_constraints(const OcpSpec& spec, const Eigen::MatrixXd& shape) {
  if (spec.num_state_rows() == 0) return std::numeric_limits<double>::infinity();
  Eigen::LLT<Eigen::MatrixXd> llt(shape);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("max_level_inside_constraints: shape must be PD");
  double level = std::numeric_limits<double>::infinity();
  for (int i = 0; i < spec.num_state_rows(); ++i) {
    Eigen::VectorXd a = spec.g_rows.row(i).transpose();
    double denom = a.dot(llt.solve(a));  // max of a'x over {x'Sx <= 1} squared
    if (denom <= 0.0) continue;
    double b = spec.g_rhs[i];
    if (b <= 0.0) return 0.0;
    level = std::min(level, b * b / denom);
  }
  return level;
}

double calibrate_terminal_level(OcpSpec& spec, const TerminalLaw& law,
                                const DynamicsModel& model, int n_samples,
                                std::uint64_t seed, double pass_tolerance) {
  double geometric = max_level_inside_constraints(spec, spec.terminal_shape);
  if (!std::isfinite(geometric)) geometric = 1.0;
  spec.alpha = geometric;

  // Search at a stricter internal tolerance, then take 10% off the passing
  // level so fresh draws stay under the caller's tolerance.
  const double internal = 0.5 * pass_tolerance;
  for (int round = 0; round < 200; ++round) {
    TerminalValidation rep = validate_terminal(spec, law, model, n_samples,
                                               seed + round, internal);
    if (rep.max_violation <= internal) {
      spec.alpha *= 0.9;
      return spec.alpha;
    }
    double next = 0.9 * std::min(rep.largest_passing_alpha, 0.9 * spec.alpha);
    if (!(next > 0.0) || !std::isfinite(next))
      throw std::runtime_error("calibrate_terminal_level: level collapsed to zero");
    spec.alpha = next;
  }
  throw std::runtime_error("calibrate_terminal_level: no certified level found");
}

}  // namespace plmpc
