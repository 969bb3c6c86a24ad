#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "plmpc/usv_model.hpp"

using namespace plmpc;

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * ((rng() >> 11) * 0x1.0p-53);
}

Eigen::VectorXd random_state(std::mt19937_64& rng) {
  Eigen::VectorXd x(6);
  x << uniform(rng, -70, 70), uniform(rng, -70, 70), uniform(rng, -3.14, 3.14),
      uniform(rng, -1, 2), uniform(rng, -1, 1), uniform(rng, -0.2, 0.2);
  return x;
}

Eigen::VectorXd random_input(std::mt19937_64& rng) {
  Eigen::VectorXd u(2);
  u << uniform(rng, -19.6, 39.2), uniform(rng, -5, 5);
  return u;
}

// Central finite differences of the step map.
void fd_jacobians(const UsvModel& model, const Eigen::VectorXd& x,
                  const Eigen::VectorXd& u, Eigen::MatrixXd& A, Eigen::MatrixXd& B) {
  A.resize(6, 6);
  B.resize(6, 2);
  for (int j = 0; j < 6; ++j) {
    double h = 1e-6 * std::max(1.0, std::abs(x[j]));
    Eigen::VectorXd xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    A.col(j) = (model.step(xp, u) - model.step(xm, u)) / (2 * h);
  }
  for (int j = 0; j < 2; ++j) {
    double h = 1e-6 * std::max(1.0, std::abs(u[j]));
    Eigen::VectorXd up = u, um = u;
    up[j] += h;
    um[j] -= h;
    B.col(j) = (model.step(x, up) - model.step(x, um)) / (2 * h);
  }
}

}  // namespace

TEST_CASE("origin is an equilibrium") {
  UsvModel model;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(6);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(2);
  CHECK(model.step(x, u).isZero(0.0));
}

TEST_CASE("pure surge decays by d11/m11") {
  UsvModel model;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(6);
  x[kStateU] = 1.0;
  Eigen::VectorXd next = model.step(x, Eigen::VectorXd::Zero(2));
  double expected = 1.0 + 0.2 * (-29.2 / 493.8);
  CHECK(next[kStateU] == doctest::Approx(expected).epsilon(1e-12));
  CHECK(next[kStateU] == doctest::Approx(0.988174).epsilon(1e-5));
  CHECK(next[kStateX] == doctest::Approx(0.2).epsilon(1e-12));  // dt * u
}

TEST_CASE("heading rotates the velocity into the position update") {
  UsvModel model;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(6);
  x[kStatePsi] = 3.14159265358979323846 / 2;
  x[kStateU] = 1.0;
  Eigen::VectorXd next = model.step(x, Eigen::VectorXd::Zero(2));
  CHECK(std::abs(next[kStateX]) < 1e-12);
  CHECK(next[kStateY] == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("non-finite input raises invalid_argument") {
  UsvModel model;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(6);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(2);
  x[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(model.step(x, u), std::invalid_argument);
  x[0] = 0;
  u[1] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(model.step(x, u), std::invalid_argument);
}

TEST_CASE("parameters must be positive") {
  UsvParams p;
  p.m22 = -1;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("analytic Jacobian entries at the origin") {
  UsvModel model;
  Eigen::MatrixXd A, B;
  model.jacobians(Eigen::VectorXd::Zero(6), Eigen::VectorXd::Zero(2), A, B);
  CHECK(A(kStateU, kStateU) == doctest::Approx(1.0 - 0.2 * 29.2 / 493.8).epsilon(1e-12));
  CHECK((A(kStateU, kStateU) - 1.0) / 0.2 == doctest::Approx(-0.059133).epsilon(1e-4));
  CHECK(B(kStateU, kInputF) == doctest::Approx(0.2 / 493.8).epsilon(1e-12));
  CHECK(B(kStateU, kInputF) == doctest::Approx(0.000405).epsilon(1e-3));
  CHECK(B(kStateR, kInputM) == doctest::Approx(0.2 / 55.8).epsilon(1e-12));
}

TEST_CASE("Jacobians match central finite differences over the boxes") {
  UsvModel model;
  std::mt19937_64 rng(42);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    Eigen::VectorXd x = random_state(rng);
    Eigen::VectorXd u = random_input(rng);
    Eigen::MatrixXd A, B, A_fd, B_fd;
    model.jacobians(x, u, A, B);
    fd_jacobians(model, x, u, A_fd, B_fd);
    double scale = std::max(1.0, std::max(A.cwiseAbs().maxCoeff(), B.cwiseAbs().maxCoeff()));
    worst = std::max(worst, (A - A_fd).cwiseAbs().maxCoeff() / scale);
    worst = std::max(worst, (B - B_fd).cwiseAbs().maxCoeff() / scale);
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("surge magnitude non-increasing under pure damping") {
  UsvModel model;
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(6);
    x[kStateU] = uniform(rng, -1, 2);
    Eigen::VectorXd next = model.step(x, Eigen::VectorXd::Zero(2));
    CHECK(std::abs(next[kStateU]) <= std::abs(x[kStateU]) + 1e-15);
  }
}

TEST_CASE("linear test model steps as written") {
  Eigen::MatrixXd A(1, 1), B(1, 1);
  A << 0.5;
  B << 1.0;
  LinearModel model(A, B);
  Eigen::VectorXd x(1), u(1);
  x << 2.0;
  u << 0.25;
  CHECK(model.step(x, u)[0] == doctest::Approx(1.25));
}
