#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include <Eigen/Dense>

#include "plmpc/experiments.hpp"
#include "plmpc/ocp.hpp"
#include "plmpc/terminal.hpp"
#include "plmpc/usv_model.hpp"

using namespace plmpc;

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * ((rng() >> 11) * 0x1.0p-53);
}

OcpSpec usv_spec(int horizon) {
  StabilizationSetup setup = make_stabilization_setup(horizon, {}, false);
  setup.spec.alpha = 1.0;
  return setup.spec;
}

Eigen::VectorXd random_state(std::mt19937_64& rng) {
  Eigen::VectorXd x(6);
  x << uniform(rng, -50, 50), uniform(rng, -50, 50), uniform(rng, -3, 3),
      uniform(rng, -0.5, 1.5), uniform(rng, -0.5, 0.5), uniform(rng, -0.15, 0.15);
  return x;
}

ControlSequence random_sequence(std::mt19937_64& rng, int N) {
  ControlSequence U(N, 2);
  for (int i = 0; i < N; ++i) {
    Eigen::VectorXd u(2);
    u << uniform(rng, -19, 39), uniform(rng, -5, 5);
    U.set_input(i, u);
  }
  return U;
}

}  // namespace

TEST_CASE("rollout matches a step-by-step loop") {
  UsvModel model;
  std::mt19937_64 rng(3);
  const int N = 15;
  Eigen::VectorXd x0 = random_state(rng);
  ControlSequence U = random_sequence(rng, N);

  Eigen::MatrixXd states = rollout(x0, U, model);
  REQUIRE(states.cols() == N + 1);
  Eigen::VectorXd x = x0;
  for (int i = 0; i <= N; ++i) {
    CHECK((states.col(i) - x).cwiseAbs().maxCoeff() == 0.0);
    if (i < N) x = model.step(x, U.input(i));
  }
}

TEST_CASE("zero rollout from the origin") {
  UsvModel model;
  ControlSequence U(10, 2);
  Eigen::MatrixXd states = rollout(Eigen::VectorXd::Zero(6), U, model);
  CHECK(states.isZero(0.0));
  OcpSpec spec = usv_spec(10);
  CHECK(cost(Eigen::VectorXd::Zero(6), U, spec, model) == 0.0);
}

TEST_CASE("single-step cost expands by hand") {
  UsvModel model;
  OcpSpec spec = usv_spec(1);
  std::mt19937_64 rng(5);
  Eigen::VectorXd x0 = random_state(rng);
  ControlSequence U = random_sequence(rng, 1);
  Eigen::VectorXd u0 = U.input(0);
  Eigen::VectorXd x1 = model.step(x0, u0);
  double expected = x0.dot(spec.Q * x0) + u0.dot(spec.R * u0) + x1.dot(spec.P * x1);
  CHECK(cost(x0, U, spec, model) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("scaling Q doubles the pure-state cost") {
  UsvModel model;
  OcpSpec spec = usv_spec(5);
  spec.R.setZero();
  spec.P.setZero();
  std::mt19937_64 rng(6);
  Eigen::VectorXd x0 = random_state(rng);
  ControlSequence U = random_sequence(rng, 5);
  double j1 = cost(x0, U, spec, model);
  spec.Q *= 2.0;
  CHECK(cost(x0, U, spec, model) == doctest::Approx(2.0 * j1).epsilon(1e-13));
}

TEST_CASE("constraint stacking order and values") {
  UsvModel model;
  OcpSpec spec = usv_spec(3);
  const int n_g = spec.num_state_rows();
  REQUIRE(n_g == 10);

  SUBCASE("interior point is feasible") {
    Eigen::VectorXd g = constraints(Eigen::VectorXd::Zero(6), ControlSequence(3, 2),
                                    spec, model);
    CHECK(g.maxCoeff() <= 0.0);
    CHECK(g.size() == spec.num_constraints());
  }

  SUBCASE("active upper box lands on zero; violation is linear") {
    ControlSequence U(3, 2);
    Eigen::VectorXd u(2);
    u << 39.2, 0.0;
    U.set_input(1, u);
    Eigen::VectorXd g = constraints(Eigen::VectorXd::Zero(6), U, spec, model);
    int idx = spec.index_of({ConstraintKind::InputUpper, 1, kInputF});
    CHECK(g[idx] == doctest::Approx(0.0));
    u << 40.0, 0.0;
    U.set_input(1, u);
    g = constraints(Eigen::VectorXd::Zero(6), U, spec, model);
    CHECK(g[idx] == doctest::Approx(0.8).epsilon(1e-13));
    CHECK(g.maxCoeff() > 0.0);
  }

  SUBCASE("index round trip is permutation free") {
    for (int i = 0; i < spec.num_constraints(); ++i) {
      ConstraintRef ref = spec.decode(i);
      CHECK(spec.index_of(ref) == i);
    }
  }
}

TEST_CASE("terminal membership uses the quadratic form") {
  OcpSpec spec = usv_spec(5);
  spec.terminal_shape = Eigen::MatrixXd::Identity(6, 6);
  spec.alpha = 4.0;
  spec.gamma0 = 0.25;

  Eigen::VectorXd x = Eigen::VectorXd::Zero(6);
  CHECK(in_terminal_set(x, spec));
  CHECK(in_inner_set(x, spec));

  x[0] = 2.0;  // level exactly alpha
  CHECK(in_terminal_set(x, spec));
  CHECK_FALSE(in_inner_set(x, spec));

  std::mt19937_64 rng(8);
  for (int t = 0; t < 200; ++t) {
    Eigen::VectorXd y(6);
    for (int i = 0; i < 6; ++i) y[i] = uniform(rng, -3, 3);
    double level = y.squaredNorm();
    CHECK(in_terminal_set(y, spec) == (level <= spec.alpha));
    CHECK(in_inner_set(y, spec) == (level <= spec.gamma0 * spec.alpha));
    if (in_inner_set(y, spec)) CHECK(in_terminal_set(y, spec));
  }
}

TEST_CASE("terminal law saturates and scales linearly") {
  UsvModel model;
  OcpSpec spec = usv_spec(5);
  TerminalLaw law = make_lqr_terminal_law(model, spec.Q, spec.R, 1e-3);

  CHECK(terminal_law_input(Eigen::VectorXd::Zero(6), law, spec.u_min, spec.u_max)
            .isZero(0.0));

  std::mt19937_64 rng(9);
  Eigen::VectorXd x(6);
  for (int i = 0; i < 6; ++i) x[i] = uniform(rng, -0.01, 0.01);
  Eigen::VectorXd u1 = terminal_law_input(x, law, spec.u_min, spec.u_max);
  Eigen::VectorXd u2 = terminal_law_input(2 * x, law, spec.u_min, spec.u_max);
  bool unsaturated = (u2.array() > spec.u_min.array() + 1e-9).all() &&
                     (u2.array() < spec.u_max.array() - 1e-9).all();
  REQUIRE(unsaturated);
  CHECK((u2 - 2 * u1).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("at-rest linearization is unstabilizable; damped solve recovers") {
  UsvModel model;
  OcpSpec spec = usv_spec(5);
  // The sway-driven y integrator has no input column: the exact equation has
  // no stabilizing solution.
  CHECK_THROWS_AS(make_lqr_terminal_law(model, spec.Q, spec.R), std::runtime_error);

  const double damping = 1e-3;
  TerminalLaw law = make_lqr_terminal_law(model, spec.Q, spec.R, damping);
  Eigen::MatrixXd A, B;
  model.jacobians(Eigen::VectorXd::Zero(6), Eigen::VectorXd::Zero(2), A, B);
  Eigen::MatrixXd Ad = (1.0 - damping) * A;

  Eigen::MatrixXd P = law.weight;
  Eigen::MatrixXd res = Ad.transpose() * P * Ad - P -
                        Ad.transpose() * P * B *
                            (spec.R + B.transpose() * P * B).inverse() *
                            B.transpose() * P * Ad +
                        spec.Q;
  CHECK(res.cwiseAbs().maxCoeff() < 1e-7 * P.cwiseAbs().maxCoeff());

  Eigen::MatrixXd closed = Ad - B * law.gain;
  CHECK(closed.eigenvalues().cwiseAbs().maxCoeff() < 1.0);
}

TEST_CASE("cruise-error Riccati gain stabilizes the true linearization") {
  TrackingSetup setup = make_tracking_setup(17.5, 1.0, 5, {}, false);
  Eigen::MatrixXd A, B;
  setup.error_model->jacobians(Eigen::VectorXd::Zero(6), Eigen::VectorXd::Zero(2),
                               A, B);

  Eigen::MatrixXd P = setup.law.weight;
  Eigen::MatrixXd res = A.transpose() * P * A - P -
                        A.transpose() * P * B *
                            (setup.spec.R + B.transpose() * P * B).inverse() *
                            B.transpose() * P * A +
                        setup.spec.Q;
  CHECK(res.cwiseAbs().maxCoeff() < 1e-8 * P.cwiseAbs().maxCoeff());

  Eigen::MatrixXd closed = A - B * setup.law.gain;
  CHECK(closed.eigenvalues().cwiseAbs().maxCoeff() < 1.0);
}

TEST_CASE("scalar Lyapunov system certifies exactly") {
  // x+ = 0.5 x, kappa = 0, Q = R = 1, P = Q / (1 - 0.25).
  Eigen::MatrixXd A(1, 1), B(1, 1);
  A << 0.5;
  B << 0.0;
  LinearModel model(A, B);

  OcpSpec spec;
  spec.Q = Eigen::MatrixXd::Identity(1, 1);
  spec.R = Eigen::MatrixXd::Identity(1, 1);
  spec.P = Eigen::MatrixXd::Constant(1, 1, 1.0 / 0.75);
  spec.horizon = 1;
  spec.u_min = Eigen::VectorXd::Constant(1, -1);
  spec.u_max = Eigen::VectorXd::Constant(1, 1);
  spec.terminal_shape = spec.P;
  spec.alpha = 1.0;

  TerminalLaw law;
  law.gain = Eigen::MatrixXd::Zero(1, 1);
  law.weight = spec.P;

  // The decrease holds with equality, so samples sit on the boundary up to
  // roundoff.
  TerminalValidation rep = validate_terminal(spec, law, model, 5000, 0x7e51a11cULL,
                                             1e-12);
  CHECK(rep.max_violation <= 1e-12);
  CHECK(rep.fraction_ok == 1.0);
  CHECK(rep.largest_passing_alpha == doctest::Approx(spec.alpha));
}

TEST_CASE("tracking-error certificate: calibrated level passes fresh samples") {
  TrackingSetup setup = make_tracking_setup(17.5, 1.0, 5, {}, false);
  OcpSpec spec = setup.spec;
  double alpha = calibrate_terminal_level(spec, setup.law, *setup.error_model,
                                          4000, 21, 1e-9);
  CHECK(alpha > 0.0);
  TerminalValidation rep =
      validate_terminal(spec, setup.law, *setup.error_model, 4000, 99, 1e-9);
  CHECK(rep.max_violation <= 1e-8);
  CHECK(rep.fraction_ok == 1.0);
  CHECK(alpha <= max_level_inside_constraints(spec, spec.terminal_shape));

  SUBCASE("a quarter of the level still passes") {
    spec.alpha = 0.25 * alpha;
    TerminalValidation quarter =
        validate_terminal(spec, setup.law, *setup.error_model, 4000, 131, 1e-9);
    CHECK(quarter.fraction_ok == 1.0);
  }
}

TEST_CASE("stabilization certificate holds at the acceptance tolerance") {
  UsvModel model;
  OcpSpec spec = usv_spec(5);
  TerminalLaw law = make_lqr_terminal_law(model, spec.Q, spec.R, 1e-3);
  spec.terminal_shape = law.weight;
  calibrate_terminal_level(spec, law, model, 10000, 4242, 1e-9);
  TerminalValidation rep = validate_terminal(spec, law, model, 10000, 777);
  CHECK(rep.max_violation <= 1e-8);
  CHECK(spec.alpha <= max_level_inside_constraints(spec, spec.terminal_shape));
}

TEST_CASE("paper cost weights fail the decrease condition as terminal weight") {
  UsvModel model;
  OcpSpec spec = usv_spec(5);
  TerminalLaw reference = make_lqr_terminal_law(model, spec.Q, spec.R, 1e-3);
  TerminalLaw law;
  law.gain = reference.gain;
  law.weight = spec.P;  // diag(10,10,20,.1,.1,.1) as V_f
  spec.terminal_shape = spec.P;
  spec.alpha = 1.0;
  TerminalValidation rep = validate_terminal(spec, law, model, 2000, 11);
  CHECK(rep.max_violation > 0.0);
}

TEST_CASE("adjoint gradient matches finite differences") {
  UsvModel model;
  OcpSpec spec = usv_spec(8);
  std::mt19937_64 rng(33);
  Eigen::VectorXd x0 = random_state(rng);
  ControlSequence U = random_sequence(rng, 8);
  Eigen::VectorXd w(spec.num_constraints());
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = uniform(rng, 0, 1);

  RolloutData roll = rollout_data(x0, U, model, true);
  Eigen::VectorXd grad = ocp_gradient(roll, U, spec, 1.0, &w);

  auto value = [&](const Eigen::VectorXd& z) {
    ControlSequence Uz = ControlSequence::from_stacked(8, 2, z);
    RolloutData r = rollout_data(x0, Uz, model, false);
    return trajectory_cost(r, Uz, spec) + w.dot(stacked_constraints(r, Uz, spec));
  };
  // The cost sits at ~1e6 here, so the step must stay well above the
  // cancellation floor of the central difference.
  double worst = 0.0;
  for (Eigen::Index j = 0; j < U.stacked.size(); ++j) {
    double h = 1e-4 * std::max(1.0, std::abs(U.stacked[j]));
    Eigen::VectorXd zp = U.stacked, zm = U.stacked;
    zp[j] += h;
    zm[j] -= h;
    double fd = (value(zp) - value(zm)) / (2 * h);
    worst = std::max(worst, std::abs(fd - grad[j]) / std::max(1.0, std::abs(grad[j])));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("constraint Jacobian matches finite differences") {
  UsvModel model;
  OcpSpec spec = usv_spec(4);
  std::mt19937_64 rng(51);
  Eigen::VectorXd x0 = random_state(rng);
  ControlSequence U = random_sequence(rng, 4);

  RolloutData roll = rollout_data(x0, U, model, true);
  Eigen::MatrixXd jac = constraint_jacobian(roll, spec);

  double worst = 0.0;
  for (Eigen::Index j = 0; j < U.stacked.size(); ++j) {
    double h = 1e-6;
    Eigen::VectorXd zp = U.stacked, zm = U.stacked;
    zp[j] += h;
    zm[j] -= h;
    Eigen::VectorXd gp = constraints(x0, ControlSequence::from_stacked(4, 2, zp), spec, model);
    Eigen::VectorXd gm = constraints(x0, ControlSequence::from_stacked(4, 2, zm), spec, model);
    Eigen::VectorXd fd = (gp - gm) / (2 * h);
    worst = std::max(worst, (fd - jac.col(j)).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-7);
}

TEST_CASE("diverging rollout raises DivergedRollout") {
  Eigen::MatrixXd A(1, 1), B(1, 1);
  A << 1e200;
  B << 0.0;
  LinearModel model(A, B);
  ControlSequence U(4, 1);
  Eigen::VectorXd x0 = Eigen::VectorXd::Ones(1);
  CHECK_THROWS_AS(rollout(x0, U, model), DivergedRollout);
}

TEST_CASE("spec validation rejects malformed fields") {
  OcpSpec spec = usv_spec(5);
  SUBCASE("bad gamma0") {
    spec.gamma0 = 1.5;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  }
  SUBCASE("crossed input box") {
    spec.u_min[0] = spec.u_max[0] + 1;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  }
  SUBCASE("asymmetric Q") {
    spec.Q(0, 1) = 1.0;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  }
}
