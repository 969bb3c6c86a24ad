#include "plmpc/policy.hpp"

#include <sstream>

namespace plmpc {

namespace {

std::string encode_vector(const Eigen::VectorXd& v) {
  std::ostringstream out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out << ",";
    out << encode_double(v[i]);
  }
  return out.str();
}

Eigen::VectorXd decode_vector(const std::string& text) {
  std::vector<double> values;
  std::istringstream in(text);
  std::string token;
  while (std::getline(in, token, ',')) values.push_back(decode_double(token));
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) v[static_cast<Eigen::Index>(i)] = values[i];
  return v;
}

}  // namespace

void PolicyModel::validate() const {
  net.validate();
  if (input_scale.size() != net.input_dim())
    throw std::invalid_argument("PolicyModel: input_scale dimension mismatch");
  if (output_scale.size() != net.output_dim())
    throw std::invalid_argument("PolicyModel: output_scale dimension mismatch");
  if (horizon * input_dim != net.output_dim())
    throw std::invalid_argument("PolicyModel: output does not reshape to N x m");
  if (!(input_scale.array() > 0.0).all() || !(output_scale.array() > 0.0).all())
    throw std::invalid_argument("PolicyModel: scales must be positive");
}

Eigen::MatrixXd PolicyModel::scale_inputs(const Eigen::MatrixXd& states) const {
  return input_scale.cwiseInverse().asDiagonal() * states;
}

ControlSequence PolicyModel::sequence_from_raw(const Eigen::VectorXd& raw) const {
  return ControlSequence::from_stacked(horizon, input_dim,
                                       raw.cwiseProduct(output_scale));
}

ControlSequence PolicyModel::eval(const Eigen::VectorXd& x) const {
  return sequence_from_raw(forward(net, x.cwiseQuotient(input_scale)));
}

PolicyModel make_policy(const OcpSpec& spec, const Eigen::VectorXd& input_scale,
                        std::uint64_t seed, const std::vector<int>& hidden) {
  PolicyModel policy;
  policy.horizon = spec.horizon;
  policy.input_dim = spec.input_dim();

  std::vector<int> sizes;
  sizes.push_back(spec.state_dim());
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(spec.horizon * spec.input_dim());
  policy.net = make_network(sizes, Activation::kRelu, seed);

  policy.input_scale = input_scale;
  // Half-width of the input box per control entry, tiled over the horizon.
  Eigen::VectorXd half = 0.5 * (spec.u_max - spec.u_min);
  policy.output_scale.resize(policy.net.output_dim());
  for (int i = 0; i < spec.horizon; ++i)
    policy.output_scale.segment(static_cast<Eigen::Index>(i) * spec.input_dim(),
                                spec.input_dim()) = half;
  policy.validate();
  return policy;
}

void save_policy(const PolicyModel& policy, const std::string& path,
                 std::map<std::string, std::string> metadata) {
  policy.validate();
  metadata["input_scale"] = encode_vector(policy.input_scale);
  metadata["output_scale"] = encode_vector(policy.output_scale);
  metadata["horizon"] = std::to_string(policy.horizon);
  metadata["input_dim"] = std::to_string(policy.input_dim);
  save_checkpoint(policy.net, path, metadata);
}

PolicyModel load_policy(const std::string& path) {
  Checkpoint ck = load_checkpoint(path);
  PolicyModel policy;
  policy.net = std::move(ck.params);
  auto need = [&](const char* key) -> const std::string& {
    auto it = ck.metadata.find(key);
    if (it == ck.metadata.end())
      throw FormatError(std::string("policy checkpoint: missing metadata key ") + key);
    return it->second;
  };
  policy.input_scale = decode_vector(need("input_scale"));
  policy.output_scale = decode_vector(need("output_scale"));
  policy.horizon = std::stoi(need("horizon"));
  policy.input_dim = std::stoi(need("input_dim"));
  policy.validate();
  return policy;
}

}  // namespace plmpc
