#include "gnninject/agent/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gnninject/core/errors.hpp"
#include "gnninject/tensor/ops.hpp"

namespace gnninject {

void PpoConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ValidationError(std::string("ppo config: ") + what);
  };
  require(gamma > 0.0 && gamma <= 1.0, "gamma must be in (0, 1]");
  require(lambda >= 0.0 && lambda <= 1.0, "lambda must be in [0, 1]");
  require(clip > 0.0 && clip < 1.0, "clip must be in (0, 1)");
  require(entropy_coef >= 0.0 && value_coef > 0.0, "loss coefficients must be non-negative");
  require(batch > 0 && parallel_envs > 0 && steps_per_env > 0, "batch, parallel_envs and steps_per_env must be positive");
  require(update_steps > 0 && train_epochs > 0 && eval_every > 0 && patience > 0, "update_steps, train_epochs, eval_every and patience must be positive");
  require(lr > 0.0 && max_grad_norm > 0.0, "lr and max_grad_norm must be positive");
  require(eval_goals > 0 && workers > 0, "eval_goals and workers must be positive");
}

void RolloutBuffer::reset(std::size_t envs, std::size_t n_steps, std::size_t sdim, std::size_t n_actions) {
  num_envs = envs;
  steps = n_steps;
  state_dim = sdim;
  num_actions = n_actions;
  const std::size_t n = envs * n_steps;
  states.assign(n * sdim, 0.0);
  masks.assign(n * n_actions, 0);
  actions.assign(n, 0);
  rewards.assign(n, 0.0);
  log_probs.assign(n, 0.0);
  values.assign(n, 0.0);
  dones.assign(n, 0);
  bootstrap.assign(envs, 0.0);
  advantages.assign(n, 0.0);
  returns.assign(n, 0.0);
}

void compute_gae(RolloutBuffer& buf, double gamma, double lambda) {
  for (std::size_t e = 0; e < buf.num_envs; ++e) {
    double next_adv = 0.0;
    for (std::size_t s = buf.steps; s-- > 0;) {
      const std::size_t i = buf.index(s, e);
      const bool done = buf.dones[i] != 0;
      const double next_value = done ? 0.0 : (s + 1 == buf.steps ? buf.bootstrap[e] : buf.values[buf.index(s + 1, e)]);
      const double delta = buf.rewards[i] + gamma * next_value - buf.values[i];
      // The segment end truncates the sum just like an episode end; the
      // bootstrap value carries the remainder.
      const double carry = done || s + 1 == buf.steps ? 0.0 : next_adv;
      next_adv = delta + gamma * lambda * carry;
      buf.advantages[i] = next_adv;
      buf.returns[i] = next_adv + buf.values[i];
    }
  }
}

double clip_value(double x, double lo, double hi) { return x < lo ? lo : (x > hi ? hi : x); }

PpoLosses ppo_losses(const Agent& agent, const RolloutBuffer& buf, std::span<const std::size_t> idx,
                     const PpoConfig& cfg) {
  const std::size_t bsz = idx.size();
  ad::Tensor states(bsz, buf.state_dim);
  std::vector<std::uint8_t> mask(bsz * buf.num_actions);
  std::vector<std::size_t> actions(bsz);
  std::vector<double> adv(bsz), old_lp(bsz), ret(bsz);
  for (std::size_t r = 0; r < bsz; ++r) {
    const std::size_t i = idx[r];
    std::copy_n(buf.states.data() + i * buf.state_dim, buf.state_dim, states.mutable_values().data() + r * buf.state_dim);
    std::copy_n(buf.masks.data() + i * buf.num_actions, buf.num_actions, mask.data() + r * buf.num_actions);
    actions[r] = buf.actions[i];
    adv[r] = buf.advantages[i];
    old_lp[r] = buf.log_probs[i];
    ret[r] = buf.returns[i];
  }
  if (cfg.normalize_advantages && bsz > 1) {
    double mean = 0.0, var = 0.0;
    for (double a : adv) mean += a;
    mean /= static_cast<double>(bsz);
    for (double a : adv) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / static_cast<double>(bsz));
    for (double& a : adv) a = (a - mean) / (sd + 1e-8);
  }

  const ad::Tensor lp_all = ad::masked_log_softmax_rows(agent.policy_logits(states), mask);
  const ad::Tensor lp = ad::pick(lp_all, actions);
  const ad::Tensor ratio = ad::exp(ad::sub(lp, ad::Tensor(bsz, 1, old_lp)));
  const ad::Tensor a_t(bsz, 1, adv);
  const ad::Tensor surr1 = ad::hadamard(ratio, a_t);
  const ad::Tensor surr2 = ad::hadamard(ad::clip(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip), a_t);
  const ad::Tensor policy_loss = ad::scale(ad::mean(ad::minimum(surr1, surr2)), -1.0);
  const ad::Tensor value_loss = ad::mean(ad::huber(ad::sub(agent.values(states), ad::Tensor(bsz, 1, ret))));
  const ad::Tensor neg_entropy = ad::mean(ad::plogp_rows(lp_all));
  const ad::Tensor loss = ad::add(ad::add(policy_loss, ad::scale(value_loss, cfg.value_coef)),
                                  ad::scale(neg_entropy, cfg.entropy_coef));
  return {policy_loss, value_loss, neg_entropy, loss, ratio};
}

UpdateStats ppo_update(Agent& agent, ad::Adam& opt, const RolloutBuffer& buf, const PpoConfig& cfg, Rng& rng) {
  const std::size_t n = buf.size();
  const std::size_t bsz = std::min(cfg.batch, n);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;

  std::vector<ad::Tensor> params = agent.parameter_tensors();
  UpdateStats stats;
  for (std::size_t u = 0; u < cfg.update_steps; ++u) {
    if (cursor + bsz > n) {
      shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    const std::span<const std::size_t> idx(order.data() + cursor, bsz);
    cursor += bsz;

    opt.zero_grad();
    const PpoLosses l = ppo_losses(agent, buf, idx, cfg);
    const ad::Tensor& loss = l.total;
    const ad::Tensor& policy_loss = l.policy;
    const ad::Tensor& value_loss = l.value;
    const ad::Tensor& neg_entropy = l.neg_entropy;
    const ad::Tensor& ratio = l.ratio;
    if (!std::isfinite(loss.item())) {
      throw TrainingError("non-finite PPO loss at minibatch " + std::to_string(u) + " (policy " +
                          std::to_string(policy_loss.item()) + ", value " + std::to_string(value_loss.item()) +
                          ", entropy " + std::to_string(-neg_entropy.item()) + ")");
    }
    ad::backward(loss);
    stats.grad_norm += ad::clip_grad_norm(params, cfg.max_grad_norm);
    opt.step();

    double kl = 0.0, clipped = 0.0, dev = 0.0;
    for (std::size_t r = 0; r < bsz; ++r) {
      const double rr = ratio.values()[r];
      kl += (rr - 1.0) - std::log(rr);
      clipped += std::abs(rr - 1.0) > cfg.clip ? 1.0 : 0.0;
      dev = std::max(dev, std::abs(rr - 1.0));
    }
    if (u == 0) stats.first_ratio_deviation = dev;
    stats.policy_loss += policy_loss.item();
    stats.value_loss += value_loss.item();
    stats.entropy += -neg_entropy.item();
    stats.approx_kl += kl / static_cast<double>(bsz);
    stats.clip_fraction += clipped / static_cast<double>(bsz);
    ++stats.minibatches;
  }
  const double m = static_cast<double>(stats.minibatches);
  stats.policy_loss /= m;
  stats.value_loss /= m;
  stats.entropy /= m;
  stats.approx_kl /= m;
  stats.clip_fraction /= m;
  stats.grad_norm /= m;
  return stats;
}

}  // namespace gnninject
