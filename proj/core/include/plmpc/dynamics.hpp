#pragma once

#include <Eigen/Core>

namespace plmpc {

/// Discrete-time dynamics x(k+1) = f(x(k), u(k)) with analytic Jacobians.
///
/// Implementations are pure functions over immutable parameters and may be
/// called from any number of threads.
class DynamicsModel {
 public:
  virtual ~DynamicsModel() = default;

  virtual int state_dim() const = 0;
  virtual int input_dim() const = 0;

  /// One step of the dynamics. Throws std::invalid_argument on non-finite
  /// input.
  virtual Eigen::VectorXd step(const Eigen::VectorXd& x,
                               const Eigen::VectorXd& u) const = 0;

  /// A = df/dx and B = df/du evaluated at (x, u).
  virtual void jacobians(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                         Eigen::MatrixXd& A, Eigen::MatrixXd& B) const = 0;
};

/// x(k+1) = A x + B u. Used by tests and linearized baselines.
class LinearModel final : public DynamicsModel {
 public:
  LinearModel(Eigen::MatrixXd A, Eigen::MatrixXd B)
      : A_(std::move(A)), B_(std::move(B)) {}

  int state_dim() const override { return static_cast<int>(A_.rows()); }
  int input_dim() const override { return static_cast<int>(B_.cols()); }

  Eigen::VectorXd step(const Eigen::VectorXd& x,
                       const Eigen::VectorXd& u) const override {
    return A_ * x + B_ * u;
  }

  void jacobians(const Eigen::VectorXd&, const Eigen::VectorXd&,
                 Eigen::MatrixXd& A, Eigen::MatrixXd& B) const override {
    A = A_;
    B = B_;
  }

  const Eigen::MatrixXd& A() const { return A_; }
  const Eigen::MatrixXd& B() const { return B_; }

 private:
  Eigen::MatrixXd A_, B_;
};

}  // namespace plmpc
