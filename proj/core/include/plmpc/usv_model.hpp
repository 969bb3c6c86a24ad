#pragma once

#include "plmpc/dynamics.hpp"

namespace plmpc {

/// State layout: positions in the north-east frame, velocities in the body
/// frame.
enum StateIndex : int {
  kStateX = 0,     ///< north position [m]
  kStateY = 1,     ///< east position [m]
  kStatePsi = 2,   ///< heading [rad]
  kStateU = 3,     ///< surge velocity [m/s]
  kStateV = 4,     ///< sway velocity [m/s]
  kStateR = 5,     ///< yaw rate [rad/s]
};

enum InputIndex : int {
  kInputF = 0,  ///< total thrust T_l + T_r [N]
  kInputM = 1,  ///< differential moment (T_l - T_r) * d_l [N m]
};

/// Identified vessel parameters. Inertia and damping matrices are diagonal.
struct UsvParams {
  double m11 = 493.8;        ///< surge inertia [kg]
  double m22 = 455.8;        ///< sway inertia [kg]
  double m33 = 55.8;         ///< yaw inertia [kg m^2]
  double d11 = 29.2;         ///< surge damping [kg/s]
  double d22 = 2173.7;       ///< sway damping [kg/s]
  double d33 = 17.7;         ///< yaw damping [kg m^2/s]
  double lever_arm = 0.277;  ///< thruster axis distance d_l [m]
  double dt = 0.2;           ///< step size [s], 5 Hz execution rate

  /// Throws std::invalid_argument unless every entry is positive and finite.
  void validate() const;
};

/// Forward-Euler discrete model of an underactuated twin-thruster surface
/// vessel. The origin is an equilibrium: step(0, 0) = 0 exactly. Constraints
/// are not enforced here; the plant integrates whatever it is given.
class UsvModel final : public DynamicsModel {
 public:
  explicit UsvModel(UsvParams params = {});

  int state_dim() const override { return 6; }
  int input_dim() const override { return 2; }

  Eigen::VectorXd step(const Eigen::VectorXd& x,
                       const Eigen::VectorXd& u) const override;

  void jacobians(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                 Eigen::MatrixXd& A, Eigen::MatrixXd& B) const override;

  const UsvParams& params() const { return params_; }

 private:
  UsvParams params_;
};

}  // namespace plmpc
