#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "plmpc/ocp.hpp"
#include "plmpc/solver.hpp"

namespace plmpc {

/// One labeled pair (x(k), U*(k)) with trajectory provenance.
struct TrainingSample {
  Eigen::VectorXd state;
  ControlSequence label;
  double optimal_cost = 0.0;
  std::uint32_t trajectory_id = 0;
  std::uint32_t step_index = 0;
  std::uint8_t solve_status = 0;  ///< SolveStatus of the labeling solve
};

struct SamplerConfig {
  double tau = 5.0;       ///< base separation distance
  double discount = 0.9;  ///< gamma, in (0, 1)
  int period = 50;        ///< K: tau shrinks every K accepted samples
  Eigen::VectorXd lower;  ///< proposal box; equal bounds pin a coordinate
  Eigen::VectorXd upper;

  void validate() const;
};

/// Rejection sampler that spreads initial states over the feasible box by
/// keeping each accepted point farther than tau_k from the running center of
/// gravity. Rejections are normal outcomes and do not advance the counter.
class InitialStateSampler {
 public:
  explicit InitialStateSampler(SamplerConfig config);

  /// Distance threshold the next candidate must beat.
  double current_tau() const;

  /// Uniform draw over the proposal box; no filter applied.
  Eigen::VectorXd draw_candidate(std::mt19937_64& rng) const;

  /// Runs the distance filter on an externally supplied candidate; on
  /// acceptance updates the center of gravity and the counter.
  std::optional<Eigen::VectorXd> consider(const Eigen::VectorXd& candidate);

  /// Draws one candidate and filters it.
  std::optional<Eigen::VectorXd> propose(std::mt19937_64& rng) {
    return consider(draw_candidate(rng));
  }

  /// Draws candidates until one is accepted (throws after max_tries).
  Eigen::VectorXd sample(std::mt19937_64& rng, int max_tries = 100000);

  int accepted_count() const { return accepted_; }
  const Eigen::VectorXd& center_of_gravity() const { return center_; }

  /// Acceptance log for post-hoc verification.
  const std::vector<Eigen::VectorXd>& accepted_states() const { return history_; }
  const std::vector<double>& acceptance_taus() const { return taus_; }
  const std::vector<double>& acceptance_distances() const { return distances_; }

 private:
  SamplerConfig config_;
  Eigen::VectorXd center_;
  int accepted_ = 0;
  std::vector<Eigen::VectorXd> history_;
  std::vector<double> taus_;
  std::vector<double> distances_;
};

/// Flat sample store with seeded uniform-with-replacement draws.
class DataBuffer {
 public:
  explicit DataBuffer(std::uint64_t seed) : rng_(seed) {}

  void add(TrainingSample sample) { samples_.push_back(std::move(sample)); }
  void add_all(std::vector<TrainingSample> samples);
  std::size_t size() const { return samples_.size(); }
  const TrainingSample& at(std::size_t i) const { return samples_[i]; }
  const std::vector<TrainingSample>& samples() const { return samples_; }

  std::size_t draw_index();
  const TrainingSample& draw() { return samples_[draw_index()]; }

  /// Fisher-Yates shuffle with the buffer RNG.
  void shuffle();

 private:
  std::vector<TrainingSample> samples_;
  std::mt19937_64 rng_;
};

/// Runs receding-horizon NMPC for traj_len steps and records the pair
/// (x(k), U*(k)) at k = 0..traj_len (traj_len + 1 records). A failed solve
/// truncates the trajectory at the last optimal step; `truncated` flags it.
struct LabeledTrajectory {
  std::vector<TrainingSample> samples;
  bool truncated = false;
};

LabeledTrajectory label_trajectory(const Eigen::VectorXd& x0, int traj_len,
                                   const OcpSpec& spec, const DynamicsModel& model,
                                   const SolverConfig& solver_cfg,
                                   std::uint32_t trajectory_id,
                                   const TerminalLaw* law = nullptr);

struct DataGenConfig {
  int num_trajectories = 500;  ///< H
  int traj_len = 100;          ///< L
  SamplerConfig sampler;
  std::uint64_t seed = 1;
};

/// Samples H feasible initial states, labels the trajectories in parallel,
/// and shuffles everything into one buffer-ordered list. Deterministic for a
/// fixed seed and thread-count independent.
std::vector<TrainingSample> generate_dataset(const DataGenConfig& cfg,
                                             const OcpSpec& spec,
                                             const DynamicsModel& model,
                                             const SolverConfig& solver_cfg,
                                             const TerminalLaw* law = nullptr);

/// Dataset file: text header of key=value lines terminated by "end-header",
/// then fixed-width little-endian binary records.
struct DatasetHeader {
  int state_dim = 0;
  int input_dim = 0;
  int horizon = 0;
  std::uint64_t count = 0;
  std::uint64_t seed = 0;
  std::string model_hash;
  std::string spec_hash;
};

void write_dataset(const std::string& path, const DatasetHeader& header,
                   const std::vector<TrainingSample>& samples);
std::pair<DatasetHeader, std::vector<TrainingSample>> read_dataset(const std::string& path);

/// FNV-1a over the canonical byte serialization of doubles.
std::string hash_doubles(const std::vector<double>& values);
std::string spec_hash(const OcpSpec& spec);
std::string model_hash(const DynamicsModel& model);

}  // namespace plmpc
