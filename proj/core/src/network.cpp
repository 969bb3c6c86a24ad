#include "plmpc/network.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>

namespace plmpc {

namespace {

constexpr char kMagic[5] = {'P', 'L', 'M', 'P', 'C'};
constexpr std::uint8_t kVersion = 1;

double he_uniform(std::mt19937_64& rng, double limit) {
  double u = 2.0 * ((rng() >> 11) * 0x1.0p-53) - 1.0;
  return limit * u;
}

Eigen::ArrayXXd activation_derivative(Activation a, const Eigen::MatrixXd& pre) {
  switch (a) {
    case Activation::kRelu:
      return (pre.array() > 0.0).cast<double>();
    case Activation::kIdentity:
      return Eigen::ArrayXXd::Ones(pre.rows(), pre.cols());
    case Activation::kSigmoid: {
      Eigen::ArrayXXd s = 1.0 / (1.0 + (-pre.array()).exp());
      return s * (1.0 - s);
    }
    case Activation::kTanh: {
      Eigen::ArrayXXd t = pre.array().tanh();
      return 1.0 - t * t;
    }
  }
  throw std::logic_error("unknown activation");
}

Eigen::MatrixXd apply_activation_matrix(Activation a, const Eigen::MatrixXd& pre) {
  switch (a) {
    case Activation::kRelu:
      return pre.cwiseMax(0.0);
    case Activation::kIdentity:
      return pre;
    case Activation::kSigmoid:
      return (1.0 / (1.0 + (-pre.array()).exp())).matrix();
    case Activation::kTanh:
      return pre.array().tanh().matrix();
  }
  throw std::logic_error("unknown activation");
}

}  // namespace

double apply_activation(Activation a, double x) {
  switch (a) {
    case Activation::kRelu: return std::max(0.0, x);
    case Activation::kIdentity: return x;
    case Activation::kSigmoid: return 1.0 / (1.0 + std::exp(-x));
    case Activation::kTanh: return std::tanh(x);
  }
  throw std::logic_error("unknown activation");
}

std::vector<int> NetworkParams::layer_sizes() const {
  std::vector<int> sizes;
  sizes.push_back(input_dim());
  for (const auto& w : weights) sizes.push_back(static_cast<int>(w.rows()));
  return sizes;
}

std::size_t NetworkParams::parameter_count() const {
  std::size_t count = 0;
  for (int l = 0; l < num_layers(); ++l)
    count += static_cast<std::size_t>(weights[l].size()) + biases[l].size();
  return count;
}

void NetworkParams::validate() const {
  if (weights.empty() || weights.size() != biases.size() ||
      weights.size() != activations.size())
    throw std::invalid_argument("NetworkParams: ragged layer lists");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (biases[l].size() != weights[l].rows())
      throw std::invalid_argument("NetworkParams: bias dimension mismatch");
    if (l + 1 < weights.size() && weights[l + 1].cols() != weights[l].rows())
      throw std::invalid_argument("NetworkParams: consecutive layer dims differ");
    if (!weights[l].allFinite() || !biases[l].allFinite())
      throw std::invalid_argument("NetworkParams: non-finite parameters");
  }
}

NetworkParams make_network(const std::vector<int>& sizes, Activation hidden,
                           std::uint64_t seed) {
  if (sizes.size() < 2)
    throw std::invalid_argument("make_network: need at least input and output sizes");
  std::mt19937_64 rng(seed);
  NetworkParams net;
  const int layers = static_cast<int>(sizes.size()) - 1;
  for (int l = 0; l < layers; ++l) {
    double limit = std::sqrt(6.0 / sizes[l]);
    Eigen::MatrixXd w(sizes[l + 1], sizes[l]);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = he_uniform(rng, limit);
    net.weights.push_back(std::move(w));
    net.biases.push_back(Eigen::VectorXd::Zero(sizes[l + 1]));
    net.activations.push_back(l + 1 < layers ? hidden : Activation::kIdentity);
  }
  return net;
}

Eigen::MatrixXd forward_batch(const NetworkParams& net, const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != net.input_dim())
    throw std::invalid_argument("forward: input dimension mismatch");
  Eigen::MatrixXd a = inputs;
  for (int l = 0; l < net.num_layers(); ++l) {
    Eigen::MatrixXd z = (net.weights[l] * a).colwise() + net.biases[l];
    a = apply_activation_matrix(net.activations[l], z);
  }
  return a;
}

Eigen::VectorXd forward(const NetworkParams& net, const Eigen::VectorXd& input) {
  return forward_batch(net, input);
}

ForwardTrace forward_trace(const NetworkParams& net, const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != net.input_dim())
    throw std::invalid_argument("forward_trace: input dimension mismatch");
  ForwardTrace trace;
  trace.input = inputs;
  trace.pre.reserve(net.num_layers());
  trace.post.reserve(net.num_layers());
  const Eigen::MatrixXd* a = &trace.input;
  for (int l = 0; l < net.num_layers(); ++l) {
    trace.pre.push_back((net.weights[l] * (*a)).colwise() + net.biases[l]);
    trace.post.push_back(apply_activation_matrix(net.activations[l], trace.pre[l]));
    a = &trace.post[l];
  }
  return trace;
}

void NetworkGradient::set_zero(const NetworkParams& net) {
  d_weights.clear();
  d_biases.clear();
  for (int l = 0; l < net.num_layers(); ++l) {
    d_weights.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
    d_biases.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
  }
  d_input.resize(0, 0);
}

void NetworkGradient::add_scaled(const NetworkGradient& other, double scale) {
  for (std::size_t l = 0; l < d_weights.size(); ++l) {
    d_weights[l] += scale * other.d_weights[l];
    d_biases[l] += scale * other.d_biases[l];
  }
}

double NetworkGradient::squared_norm() const {
  double s = 0.0;
  for (std::size_t l = 0; l < d_weights.size(); ++l)
    s += d_weights[l].squaredNorm() + d_biases[l].squaredNorm();
  return s;
}

NetworkGradient backward(const NetworkParams& net, const ForwardTrace& trace,
                         const Eigen::MatrixXd& upstream) {
  const int L = net.num_layers();
  if (upstream.rows() != net.output_dim() || upstream.cols() != trace.input.cols())
    throw std::invalid_argument("backward: upstream dimension mismatch");

  NetworkGradient grad;
  grad.d_weights.resize(L);
  grad.d_biases.resize(L);

  Eigen::MatrixXd dz = upstream.cwiseProduct(
      activation_derivative(net.activations[L - 1], trace.pre[L - 1]).matrix());
  for (int l = L - 1; l >= 0; --l) {
    const Eigen::MatrixXd& a_prev = l == 0 ? trace.input : trace.post[l - 1];
    grad.d_weights[l].noalias() = dz * a_prev.transpose();
    grad.d_biases[l] = dz.rowwise().sum();
    Eigen::MatrixXd da = net.weights[l].transpose() * dz;
    if (l > 0)
      dz = da.cwiseProduct(
          activation_derivative(net.activations[l - 1], trace.pre[l - 1]).matrix());
    else
      grad.d_input = da;
  }
  return grad;
}

NetworkGradient backward(const NetworkParams& net, const Eigen::VectorXd& input,
                         const Eigen::VectorXd& upstream) {
  return backward(net, forward_trace(net, input), Eigen::MatrixXd(upstream));
}

namespace {

void write_bytes(std::ofstream& out, const void* data, std::size_t bytes) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
}

template <typename T>
void write_pod(std::ofstream& out, T value) {
  write_bytes(out, &value, sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw FormatError("checkpoint: truncated file");
  return value;
}

}  // namespace

std::string encode_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double decode_double(const std::string& text) { return std::stod(text); }

void save_checkpoint(const NetworkParams& net, const std::string& path,
                     const std::map<std::string, std::string>& metadata) {
  net.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("checkpoint: cannot open " + path + " for writing");

  write_bytes(out, kMagic, sizeof(kMagic));
  write_pod<std::uint8_t>(out, kVersion);
  const auto sizes = net.layer_sizes();
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(net.num_layers()));
  for (int s : sizes) write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s));
  for (Activation a : net.activations) write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(a));
  write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(net.parameter_count()));
  for (int l = 0; l < net.num_layers(); ++l) {
    // Row-major weight payload, then the bias.
    for (Eigen::Index i = 0; i < net.weights[l].rows(); ++i)
      for (Eigen::Index j = 0; j < net.weights[l].cols(); ++j) {
        double v = net.weights[l](i, j);
        write_pod<double>(out, v);
      }
    for (Eigen::Index i = 0; i < net.biases[l].size(); ++i)
      write_pod<double>(out, net.biases[l][i]);
  }
  if (!out) throw FormatError("checkpoint: write failed for " + path);
  out.close();

  std::ofstream meta(path + ".meta", std::ios::trunc);
  if (!meta) throw FormatError("checkpoint: cannot write sidecar for " + path);
  for (const auto& [key, value] : metadata) meta << key << "=" << value << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("checkpoint: cannot open " + path);

  char magic[5];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw FormatError("checkpoint: bad magic");
  auto version = read_pod<std::uint8_t>(in);
  if (version != kVersion)
    throw FormatError("checkpoint: unsupported format version " +
                      std::to_string(version));

  auto layers = read_pod<std::uint32_t>(in);
  if (layers == 0 || layers > 1024) throw FormatError("checkpoint: bad layer count");
  std::vector<int> sizes(layers + 1);
  for (auto& s : sizes) {
    s = static_cast<int>(read_pod<std::uint32_t>(in));
    if (s <= 0) throw FormatError("checkpoint: bad layer size");
  }
  std::vector<Activation> acts(layers);
  for (auto& a : acts) {
    auto raw = read_pod<std::uint8_t>(in);
    if (raw > 3) throw FormatError("checkpoint: bad activation tag");
    a = static_cast<Activation>(raw);
  }
  auto expected = read_pod<std::uint64_t>(in);

  Checkpoint ck;
  std::uint64_t count = 0;
  for (std::uint32_t l = 0; l < layers; ++l) {
    Eigen::MatrixXd w(sizes[l + 1], sizes[l]);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = read_pod<double>(in);
    Eigen::VectorXd b(sizes[l + 1]);
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = read_pod<double>(in);
    count += static_cast<std::uint64_t>(w.size()) + b.size();
    ck.params.weights.push_back(std::move(w));
    ck.params.biases.push_back(std::move(b));
    ck.params.activations.push_back(acts[l]);
  }
  if (count != expected) throw FormatError("checkpoint: payload count mismatch");
  char extra;
  if (in.read(&extra, 1)) throw FormatError("checkpoint: trailing bytes");
  ck.params.validate();

  std::ifstream meta(path + ".meta");
  if (meta) {
    std::string line;
    while (std::getline(meta, line)) {
      auto eq = line.find('=');
      if (eq != std::string::npos)
        ck.metadata[line.substr(0, eq)] = line.substr(eq + 1);
    }
  }
  return ck;
}

}  // namespace plmpc
