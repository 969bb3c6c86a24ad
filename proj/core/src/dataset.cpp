#include "plmpc/dataset.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "plmpc/network.hpp"  // FormatError
#include "plmpc/parallel.hpp"

namespace plmpc {

namespace {

double unit_uniform(std::mt19937_64& rng) {
  return (rng() >> 11) * 0x1.0p-53;  // [0, 1)
}

std::size_t bounded_index(std::mt19937_64& rng, std::size_t size) {
  return static_cast<std::size_t>(
      (static_cast<unsigned __int128>(rng()) * size) >> 64);
}

}  // namespace

void SamplerConfig::validate() const {
  if (!(tau > 0.0)) throw std::invalid_argument("SamplerConfig: tau must be > 0");
  if (!(discount > 0.0 && discount < 1.0))
    throw std::invalid_argument("SamplerConfig: discount must lie in (0, 1)");
  if (period < 1) throw std::invalid_argument("SamplerConfig: period must be >= 1");
  if (lower.size() == 0 || lower.size() != upper.size() ||
      !((lower.array() <= upper.array()).all()))
    throw std::invalid_argument("SamplerConfig: bad proposal box");
}

InitialStateSampler::InitialStateSampler(SamplerConfig config)
    : config_(std::move(config)) {
  config_.validate();
  center_ = Eigen::VectorXd::Zero(config_.lower.size());
}

double InitialStateSampler::current_tau() const {
  int k = accepted_ + 1;  // index the next acceptance would take
  return std::pow(config_.discount, k / config_.period) * config_.tau;
}

Eigen::VectorXd InitialStateSampler::draw_candidate(std::mt19937_64& rng) const {
  const Eigen::Index n = config_.lower.size();
  Eigen::VectorXd candidate(n);
  for (Eigen::Index i = 0; i < n; ++i)
    candidate[i] = config_.lower[i] +
                   (config_.upper[i] - config_.lower[i]) * unit_uniform(rng);
  return candidate;
}

std::optional<Eigen::VectorXd> InitialStateSampler::consider(
    const Eigen::VectorXd& candidate) {
  double tau_k = current_tau();
  if (accepted_ > 0) {
    double dis = (candidate - center_).norm();
    if (dis <= tau_k) return std::nullopt;
    distances_.push_back(dis);
  } else {
    distances_.push_back(std::numeric_limits<double>::infinity());
  }

  ++accepted_;
  center_ = (1.0 / accepted_) * candidate +
            (static_cast<double>(accepted_ - 1) / accepted_) * center_;
  history_.push_back(candidate);
  taus_.push_back(tau_k);
  return candidate;
}

Eigen::VectorXd InitialStateSampler::sample(std::mt19937_64& rng, int max_tries) {
  for (int t = 0; t < max_tries; ++t)
    if (auto accepted = propose(rng)) return *accepted;
  throw std::runtime_error("InitialStateSampler: no acceptance in max_tries draws");
}

void DataBuffer::add_all(std::vector<TrainingSample> samples) {
  for (auto& s : samples) samples_.push_back(std::move(s));
}

std::size_t DataBuffer::draw_index() {
  if (samples_.empty()) throw std::logic_error("DataBuffer: draw from empty buffer");
  return bounded_index(rng_, samples_.size());
}

void DataBuffer::shuffle() {
  for (std::size_t i = samples_.size(); i > 1; --i) {
    std::size_t j = bounded_index(rng_, i);
    std::swap(samples_[i - 1], samples_[j]);
  }
}

LabeledTrajectory label_trajectory(const Eigen::VectorXd& x0, int traj_len,
                                   const OcpSpec& spec, const DynamicsModel& model,
                                   const SolverConfig& solver_cfg,
                                   std::uint32_t trajectory_id,
                                   const TerminalLaw* law) {
  if (traj_len < 0)
    throw std::invalid_argument("label_trajectory: traj_len must be >= 0");
  LabeledTrajectory out;
  out.samples.reserve(traj_len + 1);

  Eigen::VectorXd x = x0;
  std::optional<ControlSequence> warm;
  for (int k = 0; k <= traj_len; ++k) {
    SolveResult res =
        solve_ocp(x, spec, model, solver_cfg, warm ? &*warm : nullptr);
    if (res.status != SolveStatus::kOptimal) {
      out.truncated = true;
      break;
    }
    TrainingSample sample;
    sample.state = x;
    sample.label = res.control;
    sample.optimal_cost = res.cost;
    sample.trajectory_id = trajectory_id;
    sample.step_index = static_cast<std::uint32_t>(k);
    sample.solve_status = static_cast<std::uint8_t>(res.status);
    out.samples.push_back(std::move(sample));
    if (k == traj_len) break;

    Eigen::MatrixXd predicted = rollout(x, res.control, model);
    ControlSequence shifted(spec.horizon, spec.input_dim());
    for (int i = 0; i + 1 < spec.horizon; ++i)
      shifted.set_input(i, res.control.input(i + 1));
    if (law)
      shifted.set_input(spec.horizon - 1,
                        terminal_law_input(predicted.col(spec.horizon), *law,
                                           spec.u_min, spec.u_max));
    else if (spec.horizon > 1)
      shifted.set_input(spec.horizon - 1, res.control.input(spec.horizon - 1));
    warm = std::move(shifted);

    x = model.step(x, res.control.input(0));
  }
  return out;
}

std::vector<TrainingSample> generate_dataset(const DataGenConfig& cfg,
                                             const OcpSpec& spec,
                                             const DynamicsModel& model,
                                             const SolverConfig& solver_cfg,
                                             const TerminalLaw* law) {
  if (cfg.num_trajectories < 1)
    throw std::invalid_argument("generate_dataset: need at least one trajectory");

  // Initial states are drawn serially; the sampler's accept decision depends
  // on its history. Infeasible candidates are rejected before the distance
  // filter sees them.
  InitialStateSampler sampler(cfg.sampler);
  std::mt19937_64 rng(cfg.seed);
  std::vector<Eigen::VectorXd> starts;
  starts.reserve(cfg.num_trajectories);
  long guard = 0;
  while (static_cast<int>(starts.size()) < cfg.num_trajectories) {
    if (++guard > 100000L + 10000L * cfg.num_trajectories)
      throw std::runtime_error("generate_dataset: sampler starved");
    Eigen::VectorXd candidate = sampler.draw_candidate(rng);
    if (!probe_feasible(candidate, spec, model, solver_cfg)) continue;
    if (auto accepted = sampler.consider(candidate))
      starts.push_back(std::move(*accepted));
  }

  std::vector<LabeledTrajectory> trajectories(starts.size());
  parallel_chunks(starts.size(), 16, [&](int, std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t)
      trajectories[t] = label_trajectory(starts[t], cfg.traj_len, spec, model,
                                         solver_cfg,
                                         static_cast<std::uint32_t>(t), law);
  });

  std::vector<TrainingSample> all;
  for (auto& traj : trajectories)
    for (auto& s : traj.samples) all.push_back(std::move(s));
  if (all.empty())
    throw std::runtime_error("generate_dataset: every trajectory failed");

  DataBuffer buffer(cfg.seed ^ 0x5bd1e995ULL);
  buffer.add_all(std::move(all));
  buffer.shuffle();
  return buffer.samples();
}

std::string hash_doubles(const std::vector<double>& values) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  for (double v : values) mix(&v, sizeof(v));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string spec_hash(const OcpSpec& spec) {
  std::vector<double> values;
  auto push_matrix = [&](const Eigen::MatrixXd& M) {
    for (Eigen::Index j = 0; j < M.cols(); ++j)
      for (Eigen::Index i = 0; i < M.rows(); ++i) values.push_back(M(i, j));
  };
  values.push_back(spec.horizon);
  push_matrix(spec.Q);
  push_matrix(spec.R);
  push_matrix(spec.P);
  push_matrix(spec.g_rows);
  push_matrix(spec.g_rhs);
  push_matrix(spec.u_min);
  push_matrix(spec.u_max);
  push_matrix(spec.terminal_shape);
  values.push_back(spec.alpha);
  values.push_back(spec.gamma0);
  values.push_back(spec.terminal_constraint ? 1.0 : 0.0);
  return hash_doubles(values);
}

std::string model_hash(const DynamicsModel& model) {
  // Fingerprint from probe evaluations; avoids model-specific serialization.
  const int n = model.state_dim(), m = model.input_dim();
  std::vector<double> values{static_cast<double>(n), static_cast<double>(m)};
  std::mt19937_64 rng(0x6d6f64656cULL);
  for (int probe = 0; probe < 8; ++probe) {
    Eigen::VectorXd x(n), u(m);
    for (int i = 0; i < n; ++i) x[i] = 2.0 * ((rng() >> 11) * 0x1.0p-53) - 1.0;
    for (int i = 0; i < m; ++i) u[i] = 2.0 * ((rng() >> 11) * 0x1.0p-53) - 1.0;
    Eigen::VectorXd y = model.step(x, u);
    for (int i = 0; i < n; ++i) values.push_back(y[i]);
  }
  return hash_doubles(values);
}

namespace {

void header_line(std::ostream& out, const std::string& key, const std::string& value) {
  out << key << "=" << value << "\n";
}

}  // namespace

void write_dataset(const std::string& path, const DatasetHeader& header,
                   const std::vector<TrainingSample>& samples) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("dataset: cannot open " + path + " for writing");

  header_line(out, "format", "plmpc-dataset-v1");
  header_line(out, "state_dim", std::to_string(header.state_dim));
  header_line(out, "input_dim", std::to_string(header.input_dim));
  header_line(out, "horizon", std::to_string(header.horizon));
  header_line(out, "count", std::to_string(samples.size()));
  header_line(out, "seed", std::to_string(header.seed));
  header_line(out, "model_hash", header.model_hash);
  header_line(out, "spec_hash", header.spec_hash);
  out << "end-header\n";

  for (const auto& s : samples) {
    if (s.state.size() != header.state_dim ||
        s.label.stacked.size() !=
            static_cast<Eigen::Index>(header.horizon) * header.input_dim)
      throw std::invalid_argument("write_dataset: sample dimension mismatch");
    out.write(reinterpret_cast<const char*>(s.state.data()),
              static_cast<std::streamsize>(sizeof(double) * s.state.size()));
    out.write(reinterpret_cast<const char*>(s.label.stacked.data()),
              static_cast<std::streamsize>(sizeof(double) * s.label.stacked.size()));
    out.write(reinterpret_cast<const char*>(&s.optimal_cost), sizeof(double));
    std::uint32_t ids[2] = {s.trajectory_id, s.step_index};
    out.write(reinterpret_cast<const char*>(ids), sizeof(ids));
    std::uint32_t status = s.solve_status;
    out.write(reinterpret_cast<const char*>(&status), sizeof(status));
  }
  if (!out) throw FormatError("dataset: write failed for " + path);
}

std::pair<DatasetHeader, std::vector<TrainingSample>> read_dataset(
    const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("dataset: cannot open " + path);

  DatasetHeader header;
  std::string line;
  bool terminated = false;
  while (std::getline(in, line)) {
    if (line == "end-header") {
      terminated = true;
      break;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("dataset: malformed header line");
    std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "format" && value != "plmpc-dataset-v1")
      throw FormatError("dataset: unsupported format " + value);
    else if (key == "state_dim") header.state_dim = std::stoi(value);
    else if (key == "input_dim") header.input_dim = std::stoi(value);
    else if (key == "horizon") header.horizon = std::stoi(value);
    else if (key == "count") header.count = std::stoull(value);
    else if (key == "seed") header.seed = std::stoull(value);
    else if (key == "model_hash") header.model_hash = value;
    else if (key == "spec_hash") header.spec_hash = value;
  }
  if (!terminated) throw FormatError("dataset: missing end-header");
  if (header.state_dim <= 0 || header.input_dim <= 0 || header.horizon <= 0)
    throw FormatError("dataset: bad dimensions in header");

  std::vector<TrainingSample> samples;
  samples.reserve(header.count);
  const Eigen::Index label_size =
      static_cast<Eigen::Index>(header.horizon) * header.input_dim;
  for (std::uint64_t k = 0; k < header.count; ++k) {
    TrainingSample s;
    s.state.resize(header.state_dim);
    in.read(reinterpret_cast<char*>(s.state.data()),
            static_cast<std::streamsize>(sizeof(double) * header.state_dim));
    Eigen::VectorXd stacked(label_size);
    in.read(reinterpret_cast<char*>(stacked.data()),
            static_cast<std::streamsize>(sizeof(double) * label_size));
    s.label = ControlSequence::from_stacked(header.horizon, header.input_dim,
                                            std::move(stacked));
    in.read(reinterpret_cast<char*>(&s.optimal_cost), sizeof(double));
    std::uint32_t ids[2];
    in.read(reinterpret_cast<char*>(ids), sizeof(ids));
    std::uint32_t status = 0;
    in.read(reinterpret_cast<char*>(&status), sizeof(status));
    if (!in) throw FormatError("dataset: truncated records");
    s.trajectory_id = ids[0];
    s.step_index = ids[1];
    s.solve_status = static_cast<std::uint8_t>(status);
    samples.push_back(std::move(s));
  }
  char extra;
  if (in.read(&extra, 1)) throw FormatError("dataset: trailing bytes");
  return {header, std::move(samples)};
}

}  // namespace plmpc
