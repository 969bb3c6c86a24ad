#pragma once

#include "plmpc/network.hpp"
#include "plmpc/ocp.hpp"

namespace plmpc {

/// Network plus fixed affine conditioning: the state is divided elementwise
/// by input_scale before the forward pass and the raw output is multiplied
/// elementwise by output_scale before being reshaped into a ControlSequence.
/// Scales ride in the checkpoint sidecar and survive save/load bit exactly.
struct PolicyModel {
  NetworkParams net;
  Eigen::VectorXd input_scale;
  Eigen::VectorXd output_scale;
  int horizon = 0;
  int input_dim = 0;  ///< control input dimension m

  ControlSequence eval(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd scale_inputs(const Eigen::MatrixXd& states) const;
  ControlSequence sequence_from_raw(const Eigen::VectorXd& raw) const;

  void validate() const;
};

/// Fresh policy for the given OCP: layer widths [n, 150, 250, 250, 250, 50, 2N]
/// unless overridden, ReLU hidden layers, linear output.
PolicyModel make_policy(const OcpSpec& spec, const Eigen::VectorXd& input_scale,
                        std::uint64_t seed,
                        const std::vector<int>& hidden = {150, 250, 250, 250, 50});

void save_policy(const PolicyModel& policy, const std::string& path,
                 std::map<std::string, std::string> metadata = {});
PolicyModel load_policy(const std::string& path);

}  // namespace plmpc
