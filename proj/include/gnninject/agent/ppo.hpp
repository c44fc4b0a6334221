#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gnninject/agent/networks.hpp"
#include "gnninject/core/rng.hpp"
#include "gnninject/tensor/adam.hpp"

namespace gnninject {

struct PpoConfig {
  double gamma = 0.99;
  double lambda = 0.95;
  double clip = 0.1;
  double entropy_coef = 0.02;
  double value_coef = 1.0;
  std::size_t batch = 512;
  double lr = 2e-4;
  std::size_t parallel_envs = 32;
  std::size_t steps_per_env = 128;
  /// Minibatch updates per collection phase.
  std::size_t update_steps = 10;
  /// Collection phases.
  std::size_t train_epochs = 1000;
  std::size_t eval_every = 400;
  /// Evaluations without improvement before stopping.
  std::size_t patience = 20;
  /// Goal-grid size cap for greedy evaluation.
  std::size_t eval_goals = 600;
  double max_grad_norm = 0.5;
  bool normalize_advantages = true;
  /// Threads stepping environments during collection; results do not depend on it.
  std::size_t workers = 1;

  /// Throws ValidationError unless every field is in range.
  void validate() const;
};

/// Transitions of one collection phase, laid out at step * num_envs + env.
struct RolloutBuffer {
  std::size_t num_envs = 0;
  std::size_t steps = 0;
  std::size_t state_dim = 0;
  std::size_t num_actions = 0;

  std::vector<double> states;
  std::vector<std::uint8_t> masks;
  std::vector<std::uint32_t> actions;
  std::vector<double> rewards;
  std::vector<double> log_probs;
  std::vector<double> values;
  std::vector<std::uint8_t> dones;
  /// V of the state after each env's last step; ignored where that step ended an episode.
  std::vector<double> bootstrap;

  std::vector<double> advantages;
  std::vector<double> returns;

  void reset(std::size_t envs, std::size_t steps, std::size_t state_dim, std::size_t num_actions);
  std::size_t size() const { return num_envs * steps; }
  std::size_t index(std::size_t step, std::size_t env) const { return step * num_envs + env; }
  std::span<const double> state(std::size_t i) const { return {states.data() + i * state_dim, state_dim}; }
  std::span<const std::uint8_t> mask(std::size_t i) const { return {masks.data() + i * num_actions, num_actions}; }
};

/// Fills advantages and returns by the backward recursion
/// A_t = delta_t + gamma lambda A_{t+1}, cut at episode ends and at the segment end.
void compute_gae(RolloutBuffer& buf, double gamma, double lambda);

/// clip(x, lo, hi).
double clip_value(double x, double lo, double hi);

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double grad_norm = 0.0;
  /// max |ratio - 1| over the first minibatch of the phase.
  double first_ratio_deviation = 0.0;
  std::size_t minibatches = 0;
};

struct PpoLosses {
  ad::Tensor policy;
  ad::Tensor value;
  /// mean over rows of sum_a p ln p (negative entropy).
  ad::Tensor neg_entropy;
  ad::Tensor total;
  /// pi / pi_old per row, bsz x 1.
  ad::Tensor ratio;
};

/// Loss terms over the buffer rows `idx` (advantages normalized per call
/// when cfg.normalize_advantages).
PpoLosses ppo_losses(const Agent& agent, const RolloutBuffer& buf, std::span<const std::size_t> idx,
                     const PpoConfig& cfg);

/// `update_steps` minibatch steps of the clipped objective
/// mean(-min(rA, clip(r) A)) + c_v mean(Huber(V - G)) + beta mean(sum p ln p).
/// Throws TrainingError on a non-finite loss.
UpdateStats ppo_update(Agent& agent, ad::Adam& opt, const RolloutBuffer& buf, const PpoConfig& cfg, Rng& rng);

}  // namespace gnninject
