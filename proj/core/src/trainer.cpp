#include "plmpc/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "plmpc/parallel.hpp"

namespace plmpc {

namespace {

constexpr int kChunks = 16;  // fixed reduction grid, independent of threads

struct AdamState {
  std::vector<Eigen::MatrixXd> m_w, v_w;
  std::vector<Eigen::VectorXd> m_b, v_b;
  long t = 0;

  void init(const NetworkParams& net) {
    for (int l = 0; l < net.num_layers(); ++l) {
      m_w.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
      v_w.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
      m_b.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
      v_b.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
    }
  }
};

void apply_update(NetworkParams& net, const NetworkGradient& grad,
                  const TrainConfig& cfg, AdamState& adam) {
  if (cfg.optimizer == TrainConfig::Optimizer::kSgd) {
    for (int l = 0; l < net.num_layers(); ++l) {
      net.weights[l] -= cfg.learning_rate * grad.d_weights[l];
      net.biases[l] -= cfg.learning_rate * grad.d_biases[l];
    }
    return;
  }
  ++adam.t;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double corr1 = 1.0 - std::pow(b1, adam.t);
  const double corr2 = 1.0 - std::pow(b2, adam.t);
  for (int l = 0; l < net.num_layers(); ++l) {
    adam.m_w[l] = b1 * adam.m_w[l] + (1.0 - b1) * grad.d_weights[l];
    adam.v_w[l] = b2 * adam.v_w[l] +
                  (1.0 - b2) * grad.d_weights[l].cwiseProduct(grad.d_weights[l]);
    adam.m_b[l] = b1 * adam.m_b[l] + (1.0 - b1) * grad.d_biases[l];
    adam.v_b[l] = b2 * adam.v_b[l] +
                  (1.0 - b2) * grad.d_biases[l].cwiseProduct(grad.d_biases[l]);
    net.weights[l].array() -=
        cfg.learning_rate * (adam.m_w[l].array() / corr1) /
        ((adam.v_w[l].array() / corr2).sqrt() + cfg.adam_epsilon);
    net.biases[l].array() -=
        cfg.learning_rate * (adam.m_b[l].array() / corr1) /
        ((adam.v_b[l].array() / corr2).sqrt() + cfg.adam_epsilon);
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size");
  if (!(dual_step0 > 0.0)) throw std::invalid_argument("TrainConfig: dual_step0");
  if (outer_iterations < 0) throw std::invalid_argument("TrainConfig: outer_iterations");
  if (max_inner_steps < 1) throw std::invalid_argument("TrainConfig: max_inner_steps");
}

double policy_loss(const Eigen::VectorXd& x, const ControlSequence& u_theta,
                   const ControlSequence& u_star, const OcpSpec& spec,
                   const DynamicsModel& model) {
  return cost(x, u_theta, spec, model) - cost(x, u_star, spec, model);
}

double augmented_loss(const Eigen::VectorXd& x, const ControlSequence& u_theta,
                      const ControlSequence& u_star, const DualVars& duals,
                      const OcpSpec& spec, const DynamicsModel& model) {
  duals.validate();
  if (duals.v.size() != spec.num_constraints())
    throw std::invalid_argument("augmented_loss: dual dimension mismatch");
  Eigen::VectorXd g = constraints(x, u_theta, spec, model);
  return policy_loss(x, u_theta, u_star, spec, model) +
         duals.v.dot(g.cwiseMax(0.0));
}

TrainReport train(DataBuffer& buffer, PolicyModel& policy, const OcpSpec& spec,
                  const DynamicsModel& model, const TrainConfig& cfg) {
  cfg.validate();
  policy.validate();
  if (buffer.size() == 0) throw std::invalid_argument("train: empty buffer");
  const int n = spec.state_dim();
  const Eigen::Index out_dim = policy.net.output_dim();
  const std::size_t M = buffer.size();
  const double clamp_floor = -cfg.loss_clamp_scale * cfg.solver_tolerance;

  TrainReport report;
  AdamState adam;
  if (cfg.optimizer == TrainConfig::Optimizer::kAdam) adam.init(policy.net);

  Eigen::VectorXd duals = Eigen::VectorXd::Zero(spec.num_constraints());
  std::mt19937_64 batch_rng(cfg.seed ^ 0xb47c4e5dULL);

  for (int j = 0; j < cfg.outer_iterations; ++j) {
    const auto t_epoch = std::chrono::steady_clock::now();
    double gnorm = 0.0;

    // Inner loop: minibatch descent on the mean augmented loss.
    for (int step = 0; step < cfg.max_inner_steps; ++step) {
      const int B = static_cast<int>(std::min<std::size_t>(cfg.batch_size, M));
      Eigen::MatrixXd states(n, B);
      for (int b = 0; b < B; ++b)
        states.col(b) = buffer.at(buffer.draw_index()).state;

      ForwardTrace trace = forward_trace(policy.net, policy.scale_inputs(states));
      const Eigen::MatrixXd& raw = trace.output();

      Eigen::MatrixXd upstream(out_dim, B);
      std::vector<int> chunk_bad(kChunks, 0);
      parallel_chunks(B, kChunks, [&](int c, std::size_t begin, std::size_t end) {
        for (std::size_t b = begin; b < end; ++b) {
          ControlSequence U = policy.sequence_from_raw(raw.col(static_cast<Eigen::Index>(b)));
          RolloutData roll = rollout_data(states.col(static_cast<Eigen::Index>(b)), U,
                                          model, true);
          if (roll.diverged) {
            chunk_bad[c] = 1;
            upstream.col(static_cast<Eigen::Index>(b)).setZero();
            continue;
          }
          Eigen::VectorXd g = stacked_constraints(roll, U, spec);
          Eigen::VectorXd w =
              (g.array() > 0.0).select(duals, Eigen::VectorXd::Zero(g.size()));
          Eigen::VectorXd gu = ocp_gradient(roll, U, spec, 1.0, &w);
          upstream.col(static_cast<Eigen::Index>(b)) =
              gu.cwiseProduct(policy.output_scale);
        }
      });
      if (std::find(chunk_bad.begin(), chunk_bad.end(), 1) != chunk_bad.end()) {
        report.aborted = true;
        report.abort_reason = "diverged rollout in batch at outer " +
                              std::to_string(j) + " step " + std::to_string(step);
        report.final_duals = duals;
        return report;
      }

      NetworkGradient grad =
          backward(policy.net, trace, upstream / static_cast<double>(B));
      gnorm = std::sqrt(grad.squared_norm());
      if (!std::isfinite(gnorm)) {
        report.aborted = true;
        report.abort_reason = "non-finite gradient at outer " + std::to_string(j);
        report.final_duals = duals;
        return report;
      }
      apply_update(policy.net, grad, cfg, adam);
      ++report.inner_steps;
      if (gnorm < cfg.grad_norm_tolerance) break;
    }

    // Full-buffer sweep: dual ascent increments, empirical error, violation
    // mass. Chunk partials reduce in fixed order.
    std::vector<Eigen::VectorXd> chunk_posg(kChunks,
                                            Eigen::VectorXd::Zero(duals.size()));
    std::vector<double> chunk_loss(kChunks, 0.0);
    std::vector<long> chunk_clamp(kChunks, 0);
    parallel_chunks(M, kChunks, [&](int c, std::size_t begin, std::size_t end) {
      for (std::size_t k = begin; k < end; ++k) {
        const TrainingSample& s = buffer.at(k);
        ControlSequence U = policy.eval(s.state);
        RolloutData roll = rollout_data(s.state, U, model, false);
        if (roll.diverged) {
          chunk_loss[c] += 1e30;  // surfaced as a non-finite epoch error
          continue;
        }
        double loss = trajectory_cost(roll, U, spec) - s.optimal_cost;
        if (loss < 0.0 && loss >= clamp_floor) {
          loss = 0.0;
          ++chunk_clamp[c];
        }
        chunk_loss[c] += loss;
        chunk_posg[c] += stacked_constraints(roll, U, spec).cwiseMax(0.0);
      }
    });
    Eigen::VectorXd pos_sum = Eigen::VectorXd::Zero(duals.size());
    double loss_sum = 0.0;
    for (int c = 0; c < kChunks; ++c) {
      pos_sum += chunk_posg[c];
      loss_sum += chunk_loss[c];
      report.clamped_losses += chunk_clamp[c];
    }

    const double alpha_j = cfg.dual_step0 / (1.0 + j);
    duals = (duals + (alpha_j / static_cast<double>(M)) * pos_sum).cwiseMax(0.0);

    EpochStats stats;
    stats.epoch = j;
    stats.empirical_error = loss_sum / static_cast<double>(M);
    stats.violation_mass = pos_sum.sum();
    stats.grad_norm = gnorm;
    stats.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_epoch)
            .count();
    report.epochs.push_back(stats);

    if (!std::isfinite(stats.empirical_error)) {
      report.aborted = true;
      report.abort_reason = "non-finite empirical error at outer " + std::to_string(j);
      break;
    }
  }

  report.final_duals = duals;
  return report;
}

double empirical_error(const std::vector<TrainingSample>& samples,
                       const PolicyModel& policy, const OcpSpec& spec,
                       const DynamicsModel& model) {
  if (samples.empty()) throw std::invalid_argument("empirical_error: empty set");
  std::vector<double> chunk_sum(kChunks, 0.0);
  parallel_chunks(samples.size(), kChunks, [&](int c, std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const TrainingSample& s = samples[k];
      chunk_sum[c] += policy_loss(s.state, policy.eval(s.state), s.label, spec, model);
    }
  });
  double total = 0.0;
  for (double v : chunk_sum) total += v;
  return total / static_cast<double>(samples.size());
}

double stability_bound(const BoundInputs& inputs) {
  if (!(inputs.delta > 0.0 && inputs.delta <= 1.0))
    throw std::invalid_argument("stability_bound: delta must lie in (0, 1]");
  if (!(inputs.c >= 1.0)) throw std::invalid_argument("stability_bound: c must be >= 1");
  if (!(inputs.epsilon > 0.0))
    throw std::invalid_argument("stability_bound: epsilon must be > 0");
  if (!(inputs.empirical_error >= 0.0))
    throw std::invalid_argument("stability_bound: empirical error must be >= 0");
  if (!(inputs.sample_count * inputs.delta > inputs.c - 1.0))
    throw UndefinedBound("stability_bound: need M delta > c - 1");

  double factor =
      1.0 - std::sqrt((inputs.c - 1.0) / (inputs.sample_count * inputs.delta));
  double bound = 1.0 - inputs.empirical_error / (factor * inputs.epsilon);
  return std::min(bound, 1.0);
}

}  // namespace plmpc
