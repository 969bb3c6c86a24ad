#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace plmpc {

/// Raised on malformed or truncated checkpoint files.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Activation : std::uint8_t {
  kRelu = 0,
  kIdentity = 1,
  kSigmoid = 2,
  kTanh = 3,
};

/// Layered feedforward map h_L(...h_1(z)) with h_l(z) = act(W_l z + b_l).
/// 64-bit parameters throughout.
struct NetworkParams {
  std::vector<Eigen::MatrixXd> weights;   ///< W_l: dims[l+1] x dims[l]
  std::vector<Eigen::VectorXd> biases;    ///< b_l: dims[l+1]
  std::vector<Activation> activations;    ///< one per layer

  int num_layers() const { return static_cast<int>(weights.size()); }
  int input_dim() const { return static_cast<int>(weights.front().cols()); }
  int output_dim() const { return static_cast<int>(weights.back().rows()); }
  std::vector<int> layer_sizes() const;
  std::size_t parameter_count() const;

  /// Throws std::invalid_argument on incompatible layer dimensions or
  /// non-finite parameters.
  void validate() const;
};

/// He-uniform weights (limit sqrt(6/fan_in)), zero biases. Hidden layers use
/// `hidden`; the last layer is linear.
NetworkParams make_network(const std::vector<int>& sizes, Activation hidden,
                           std::uint64_t seed);

double apply_activation(Activation a, double x);

/// Forward pass for a single input.
Eigen::VectorXd forward(const NetworkParams& net, const Eigen::VectorXd& input);

/// Forward pass for a batch; each column is one sample.
Eigen::MatrixXd forward_batch(const NetworkParams& net, const Eigen::MatrixXd& inputs);

/// Per-layer preactivations kept for the backward pass.
struct ForwardTrace {
  Eigen::MatrixXd input;
  std::vector<Eigen::MatrixXd> pre;   ///< z_l = W_l a_{l-1} + b_l
  std::vector<Eigen::MatrixXd> post;  ///< a_l = act(z_l)
  const Eigen::MatrixXd& output() const { return post.back(); }
};

ForwardTrace forward_trace(const NetworkParams& net, const Eigen::MatrixXd& inputs);

/// Exact reverse-mode gradients. d_weights/d_biases accumulate over the
/// batch; d_input holds per-column input gradients.
struct NetworkGradient {
  std::vector<Eigen::MatrixXd> d_weights;
  std::vector<Eigen::VectorXd> d_biases;
  Eigen::MatrixXd d_input;

  void set_zero(const NetworkParams& net);
  void add_scaled(const NetworkGradient& other, double scale);
  double squared_norm() const;
};

NetworkGradient backward(const NetworkParams& net, const ForwardTrace& trace,
                         const Eigen::MatrixXd& upstream);

/// Convenience single-sample form: runs the forward pass internally.
NetworkGradient backward(const NetworkParams& net, const Eigen::VectorXd& input,
                         const Eigen::VectorXd& upstream);

/// Checkpoint file: magic "PLMPC", version byte, layer-size header,
/// little-endian 64-bit float payload. A text sidecar at <path>.meta carries
/// key=value metadata lines. save -> load round trips are byte exact.
struct Checkpoint {
  NetworkParams params;
  std::map<std::string, std::string> metadata;
};

void save_checkpoint(const NetworkParams& net, const std::string& path,
                     const std::map<std::string, std::string>& metadata = {});
Checkpoint load_checkpoint(const std::string& path);

/// Exact double <-> text round trip for metadata values.
std::string encode_double(double v);
double decode_double(const std::string& text);

}  // namespace plmpc
