#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "gnninject/agent/networks.hpp"
#include "gnninject/agent/ppo.hpp"
#include "gnninject/env/attack_env.hpp"

namespace gnninject {

/// Runs fn(i) for i in [0, n) on up to `workers` threads.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

/// Every (target, label) pair, targets outer.
std::vector<AttackGoal> goal_grid(std::span<const NodeId> targets, std::size_t num_labels);
/// The full grid when it has at most `cap` goals, else `cap` distinct goals
/// drawn with `seed`, returned in grid order.
std::vector<AttackGoal> capped_goal_grid(std::span<const NodeId> targets, std::size_t num_labels, std::size_t cap,
                                         std::uint64_t seed);

/// Greedy (argmax) rollouts of every goal to the env budget, `batch`
/// episodes at a time. Returns terminal states in goal order.
std::vector<EpisodeState> greedy_rollouts(const Agent& agent, const AttackEnv& env, const LabelBank& bank,
                                          std::span<const AttackGoal> goals, std::size_t batch = 64,
                                          std::size_t workers = 1);

double greedy_success_rate(const Agent& agent, const AttackEnv& env, const LabelBank& bank,
                           std::span<const AttackGoal> goals, std::size_t workers = 1);

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double mean_reward = 0.0;
  /// Mean undiscounted return and success over episodes finished this epoch.
  double episode_return = 0.0;
  double train_success = 0.0;
  std::size_t episodes = 0;
  UpdateStats update;
  std::optional<double> eval_success;
  std::uint64_t victim_queries = 0;
};

struct TrainResult {
  /// Parameters at the best evaluation.
  Agent best;
  std::size_t best_epoch = 0;
  double best_eval_success = 0.0;
  std::vector<EpochRecord> log;
  bool early_stopped = false;
};

/// PPO training over goals drawn uniformly from targets x labels. Evaluates
/// greedily every `eval_every` epochs and after the last one; stops after
/// `patience` evaluations without improvement. Writes one JSON object per
/// epoch to `jsonl` when given.
TrainResult train_agent(const AttackEnv& env, const LabelBank& bank, std::span<const NodeId> targets,
                        const AgentShape& shape, const PpoConfig& cfg, std::uint64_t seed,
                        std::ostream* jsonl = nullptr);

/// One collection phase with the given agent; exposed for tests. `envs` and
/// `rngs` persist across phases (episodes continue where they stopped).
struct Collector {
  std::vector<EpisodeState> states;
  std::vector<Rng> rngs;
  std::vector<double> episode_returns;
  double finished_return = 0.0;
  std::size_t finished = 0;
  std::size_t successes = 0;
};

Collector make_collector(const AttackEnv& env, std::span<const NodeId> targets, std::size_t num_envs, std::uint64_t seed);
void collect(const Agent& agent, const AttackEnv& env, const LabelBank& bank, std::span<const NodeId> targets,
             Collector& col, RolloutBuffer& buf, std::size_t steps, std::size_t workers = 1);

void write_epoch_json(std::ostream& os, const EpochRecord& r);

}  // namespace gnninject
