#include "gnninject/agent/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <thread>

#include "gnninject/core/errors.hpp"
#include "gnninject/core/log.hpp"
#include "gnninject/tensor/ops.hpp"
#include "json.hpp"

namespace gnninject {

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<AttackGoal> goal_grid(std::span<const NodeId> targets, std::size_t num_labels) {
  std::vector<AttackGoal> g;
  g.reserve(targets.size() * num_labels);
  for (NodeId t : targets)
    for (LabelId y = 0; y < num_labels; ++y) g.push_back({t, y});
  return g;
}

std::vector<AttackGoal> capped_goal_grid(std::span<const NodeId> targets, std::size_t num_labels, std::size_t cap,
                                         std::uint64_t seed) {
  auto grid = goal_grid(targets, num_labels);
  if (grid.size() <= cap) return grid;
  Rng rng = derive_rng(seed, "eval-grid");
  std::vector<std::size_t> idx(grid.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  // partial Fisher-Yates: the first `cap` slots are a uniform sample
  for (std::size_t i = 0; i < cap; ++i) std::swap(idx[i], idx[i + uniform_index(rng, idx.size() - i)]);
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  std::vector<AttackGoal> out;
  for (std::size_t i : idx) out.push_back(grid[i]);
  return out;
}

namespace {

ad::Tensor embed_batch(const std::vector<EpisodeState*>& states, const LabelBank& bank, std::size_t workers) {
  const std::size_t dim = 2 * bank.num_features();
  ad::Tensor e(states.size(), dim);
  auto values = e.mutable_values();
  parallel_for(states.size(), workers, [&](std::size_t i) { embed_state(*states[i], bank, values.subspan(i * dim, dim)); });
  return e;
}

std::vector<std::uint8_t> mask_batch(const std::vector<EpisodeState*>& states) {
  std::vector<std::uint8_t> m;
  for (const auto* s : states) m.insert(m.end(), s->mask.begin(), s->mask.end());
  return m;
}

AttackGoal random_goal(std::span<const NodeId> targets, std::size_t num_labels, Rng& rng) {
  const NodeId t = targets[uniform_index(rng, targets.size())];
  return {t, static_cast<LabelId>(uniform_index(rng, num_labels))};
}

}  // namespace

std::vector<EpisodeState> greedy_rollouts(const Agent& agent, const AttackEnv& env, const LabelBank& bank,
                                          std::span<const AttackGoal> goals, std::size_t batch, std::size_t workers) {
  ad::NoGradGuard no_grad;
  std::vector<EpisodeState> out;
  out.reserve(goals.size());
  const std::size_t f = env.graph().num_features();
  for (std::size_t start = 0; start < goals.size(); start += batch) {
    const std::size_t n = std::min(batch, goals.size() - start);
    std::vector<std::optional<EpisodeState>> slots(n);
    parallel_for(n, workers, [&](std::size_t i) { slots[i].emplace(env.reset(goals[start + i])); });
    std::vector<EpisodeState> sts;
    sts.reserve(n);
    for (auto& s : slots) sts.push_back(std::move(*s));
    for (std::size_t step = 0; step < env.budget(); ++step) {
      std::vector<EpisodeState*> ptrs;
      for (auto& s : sts) ptrs.push_back(&s);
      const ad::Tensor logits = agent.policy_logits(embed_batch(ptrs, bank, workers));
      std::vector<FeatureId> actions(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto p = policy_distribution(logits.values().subspan(i * f, f), sts[i].mask);
        actions[i] = static_cast<FeatureId>(greedy_action(p));
      }
      parallel_for(n, workers, [&](std::size_t i) { env.step(sts[i], actions[i]); });
    }
    for (auto& s : sts) out.push_back(std::move(s));
  }
  return out;
}

double greedy_success_rate(const Agent& agent, const AttackEnv& env, const LabelBank& bank,
                           std::span<const AttackGoal> goals, std::size_t workers) {
  if (goals.empty()) return 0.0;
  const auto finals = greedy_rollouts(agent, env, bank, goals, 64, workers);
  std::size_t hit = 0;
  for (const auto& s : finals) hit += env.success(s) ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(goals.size());
}

Collector make_collector(const AttackEnv& env, std::span<const NodeId> targets, std::size_t num_envs,
                         std::uint64_t seed) {
  if (targets.empty()) throw ValidationError("training needs at least one target node");
  if (env.budget() == 0) throw ValidationError("training needs a budget of at least one feature");
  Collector c;
  for (std::size_t e = 0; e < num_envs; ++e) {
    c.rngs.push_back(derive_rng(seed, "collect-env-" + std::to_string(e)));
    c.states.push_back(env.reset(random_goal(targets, env.graph().num_labels(), c.rngs.back())));
  }
  c.episode_returns.assign(num_envs, 0.0);
  return c;
}

void collect(const Agent& agent, const AttackEnv& env, const LabelBank& bank, std::span<const NodeId> targets,
             Collector& col, RolloutBuffer& buf, std::size_t steps, std::size_t workers) {
  ad::NoGradGuard no_grad;
  const std::size_t n = col.states.size();
  const std::size_t f = env.graph().num_features();
  buf.reset(n, steps, 2 * f, f);
  col.finished = 0;
  col.successes = 0;
  col.finished_return = 0.0;
  std::vector<EpisodeState*> ptrs;
  for (auto& s : col.states) ptrs.push_back(&s);

  for (std::size_t step = 0; step < steps; ++step) {
    const ad::Tensor states = embed_batch(ptrs, bank, workers);
    const auto masks = mask_batch(ptrs);
    const ad::Tensor lp = ad::masked_log_softmax_rows(agent.policy_logits(states), masks);
    const ad::Tensor v = agent.values(states);
    std::vector<FeatureId> actions(n);
    for (std::size_t e = 0; e < n; ++e) {
      const std::size_t i = buf.index(step, e);
      const auto row = lp.values().subspan(e * f, f);
      const std::size_t a = sample_from_log_probs(row, col.rngs[e]);
      actions[e] = static_cast<FeatureId>(a);
      std::copy_n(states.values().data() + e * 2 * f, 2 * f, buf.states.data() + i * 2 * f);
      std::copy_n(masks.data() + e * f, f, buf.masks.data() + i * f);
      buf.actions[i] = static_cast<std::uint32_t>(a);
      buf.log_probs[i] = row[a];
      buf.values[i] = v.values()[e];
    }
    std::vector<StepResult> results(n);
    parallel_for(n, workers, [&](std::size_t e) { results[e] = env.step(col.states[e], actions[e]); });
    for (std::size_t e = 0; e < n; ++e) {
      const std::size_t i = buf.index(step, e);
      buf.rewards[i] = results[e].reward;
      buf.dones[i] = results[e].done ? 1 : 0;
      col.episode_returns[e] += results[e].reward;
      if (results[e].done) {
        ++col.finished;
        col.successes += env.success(col.states[e]) ? 1 : 0;
        col.finished_return += col.episode_returns[e];
        col.episode_returns[e] = 0.0;
      }
    }
    // Goals are drawn serially so the RNG streams do not depend on `workers`.
    std::vector<AttackGoal> next(n);
    for (std::size_t e = 0; e < n; ++e) {
      if (results[e].done) next[e] = random_goal(targets, env.graph().num_labels(), col.rngs[e]);
    }
    parallel_for(n, workers, [&](std::size_t e) {
      if (results[e].done) col.states[e] = env.reset(next[e]);
    });
  }
  const ad::Tensor last = agent.values(embed_batch(ptrs, bank, workers));
  for (std::size_t e = 0; e < n; ++e) buf.bootstrap[e] = last.values()[e];
}

void write_epoch_json(std::ostream& os, const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["lr"] = r.lr;
  j["mean_reward"] = r.mean_reward;
  j["episodes"] = r.episodes;
  j["episode_return"] = r.episode_return;
  j["train_success"] = r.train_success;
  j["policy_loss"] = r.update.policy_loss;
  j["value_loss"] = r.update.value_loss;
  j["entropy"] = r.update.entropy;
  j["approx_kl"] = r.update.approx_kl;
  j["clip_fraction"] = r.update.clip_fraction;
  j["grad_norm"] = r.update.grad_norm;
  j["first_ratio_deviation"] = r.update.first_ratio_deviation;
  j["eval_success"] = r.eval_success ? nlohmann::ordered_json(*r.eval_success) : nlohmann::ordered_json(nullptr);
  j["victim_queries"] = r.victim_queries;
  os << j.dump() << '\n';
}

TrainResult train_agent(const AttackEnv& env, const LabelBank& bank, std::span<const NodeId> targets,
                        const AgentShape& shape, const PpoConfig& cfg, std::uint64_t seed, std::ostream* jsonl) {
  cfg.validate();
  if (shape.num_features != env.graph().num_features()) throw DimensionError("agent and graph disagree on F");
  Agent agent(shape, seed);
  ad::Adam opt(agent.parameter_tensors(), ad::AdamConfig::linear_decay(cfg.lr, cfg.train_epochs * cfg.update_steps));
  Collector col = make_collector(env, targets, cfg.parallel_envs, seed);
  Rng update_rng = derive_rng(seed, "ppo-minibatch");
  const auto eval_goals = capped_goal_grid(targets, env.graph().num_labels(), cfg.eval_goals, seed);
  RolloutBuffer buf;

  TrainResult result;
  result.best = agent.clone();
  double best = -1.0;
  std::size_t stale = 0;
  const std::uint64_t q0 = env.victim().queries();
  for (std::size_t epoch = 1; epoch <= cfg.train_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = opt.current_lr();
    collect(agent, env, bank, targets, col, buf, cfg.steps_per_env, cfg.workers);
    compute_gae(buf, cfg.gamma, cfg.lambda);
    for (double r : buf.rewards) rec.mean_reward += r;
    rec.mean_reward /= static_cast<double>(buf.size());
    rec.episodes = col.finished;
    if (col.finished > 0) {
      rec.episode_return = col.finished_return / static_cast<double>(col.finished);
      rec.train_success = static_cast<double>(col.successes) / static_cast<double>(col.finished);
    }
    rec.update = ppo_update(agent, opt, buf, cfg, update_rng);

    const bool last = epoch == cfg.train_epochs;
    if (epoch % cfg.eval_every == 0 || last) {
      const double s = greedy_success_rate(agent, env, bank, eval_goals, cfg.workers);
      rec.eval_success = s;
      if (s > best) {
        best = s;
        stale = 0;
        result.best = agent.clone();
        result.best_epoch = epoch;
      } else {
        ++stale;
      }
      log::info("epoch " + std::to_string(epoch) + " eval success " + std::to_string(s));
    }
    rec.victim_queries = env.victim().queries() - q0;
    if (jsonl != nullptr) {
      write_epoch_json(*jsonl, rec);
      jsonl->flush();
    }
    result.log.push_back(rec);
    if (stale >= cfg.patience) {
      result.early_stopped = true;
      break;
    }
  }
  result.best_eval_success = std::max(best, 0.0);
  return result;
}

}  // namespace gnninject
