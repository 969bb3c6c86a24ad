#include "plmpc/usv_model.hpp"

#include <cmath>
#include <stdexcept>

namespace plmpc {

void UsvParams::validate() const {
  const double entries[] = {m11, m22, m33, d11, d22, d33, lever_arm, dt};
  for (double e : entries) {
    if (!std::isfinite(e) || e <= 0.0)
      throw std::invalid_argument("UsvParams: entries must be positive and finite");
  }
}

UsvModel::UsvModel(UsvParams params) : params_(params) { params_.validate(); }

Eigen::VectorXd UsvModel::step(const Eigen::VectorXd& x,
                               const Eigen::VectorXd& u) const {
  if (x.size() != 6 || u.size() != 2)
    throw std::invalid_argument("UsvModel::step: expected 6-dim state, 2-dim input");
  if (!x.allFinite() || !u.allFinite())
    throw std::invalid_argument("UsvModel::step: non-finite input");

  const UsvParams& p = params_;
  const double psi = x[kStatePsi], su = x[kStateU], sv = x[kStateV], r = x[kStateR];
  const double F = u[kInputF], M = u[kInputM];
  const double c = std::cos(psi), s = std::sin(psi);

  Eigen::VectorXd delta(6);
  delta[kStateX] = c * su - s * sv;
  delta[kStateY] = s * su + c * sv;
  delta[kStatePsi] = r;
  delta[kStateU] = (p.m22 * sv * r - p.d11 * su + F) / p.m11;
  delta[kStateV] = (-p.m11 * su * r - p.d22 * sv) / p.m22;
  delta[kStateR] = ((p.m11 - p.m22) * su * sv - p.d33 * r + M) / p.m33;

  return x + p.dt * delta;
}

void UsvModel::jacobians(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                         Eigen::MatrixXd& A, Eigen::MatrixXd& B) const {
  if (x.size() != 6 || u.size() != 2)
    throw std::invalid_argument("UsvModel::jacobians: expected 6-dim state, 2-dim input");
  if (!x.allFinite() || !u.allFinite())
    throw std::invalid_argument("UsvModel::jacobians: non-finite input");

  const UsvParams& p = params_;
  const double psi = x[kStatePsi], su = x[kStateU], sv = x[kStateV], r = x[kStateR];
  const double c = std::cos(psi), s = std::sin(psi);

  Eigen::MatrixXd Ac = Eigen::MatrixXd::Zero(6, 6);
  Ac(kStateX, kStatePsi) = -s * su - c * sv;
  Ac(kStateX, kStateU) = c;
  Ac(kStateX, kStateV) = -s;
  Ac(kStateY, kStatePsi) = c * su - s * sv;
  Ac(kStateY, kStateU) = s;
  Ac(kStateY, kStateV) = c;
  Ac(kStatePsi, kStateR) = 1.0;
  Ac(kStateU, kStateU) = -p.d11 / p.m11;
  Ac(kStateU, kStateV) = p.m22 * r / p.m11;
  Ac(kStateU, kStateR) = p.m22 * sv / p.m11;
  Ac(kStateV, kStateU) = -p.m11 * r / p.m22;
  Ac(kStateV, kStateV) = -p.d22 / p.m22;
  Ac(kStateV, kStateR) = -p.m11 * su / p.m22;
  Ac(kStateR, kStateU) = (p.m11 - p.m22) * sv / p.m33;
  Ac(kStateR, kStateV) = (p.m11 - p.m22) * su / p.m33;
  Ac(kStateR, kStateR) = -p.d33 / p.m33;

  Eigen::MatrixXd Bc = Eigen::MatrixXd::Zero(6, 2);
  Bc(kStateU, kInputF) = 1.0 / p.m11;
  Bc(kStateR, kInputM) = 1.0 / p.m33;

  A = Eigen::MatrixXd::Identity(6, 6) + p.dt * Ac;
  B = p.dt * Bc;
}

}  // namespace plmpc
