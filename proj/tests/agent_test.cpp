#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "gnninject/agent/networks.hpp"
#include "gnninject/agent/ppo.hpp"
#include "gnninject/agent/trainer.hpp"
#include "gnninject/baselines/baselines.hpp"
#include "gnninject/core/errors.hpp"
#include "gnninject/tensor/ops.hpp"
#include "support/dense.hpp"
#include "support/toy_setup.hpp"

using namespace gnninject;

namespace {

double entropy(const std::vector<double>& p) {
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log(x);
  return h;
}

/// Direct double sum: A_t = sum_l (gamma lambda)^l delta_{t+l}, stopping
/// after a done step or the last step of the segment.
void gae_oracle(const RolloutBuffer& b, double gamma, double lambda, std::vector<double>& adv) {
  adv.assign(b.size(), 0.0);
  for (std::size_t e = 0; e < b.num_envs; ++e) {
    std::vector<double> delta(b.steps);
    for (std::size_t s = 0; s < b.steps; ++s) {
      const std::size_t i = b.index(s, e);
      double next = 0.0;
      if (!b.dones[i]) next = s + 1 < b.steps ? b.values[b.index(s + 1, e)] : b.bootstrap[e];
      delta[s] = b.rewards[i] + gamma * next - b.values[i];
    }
    for (std::size_t t = 0; t < b.steps; ++t) {
      double sum = 0.0;
      for (std::size_t l = 0; t + l < b.steps; ++l) {
        sum += std::pow(gamma * lambda, static_cast<double>(l)) * delta[t + l];
        if (b.dones[b.index(t + l, e)]) break;
      }
      adv[b.index(t, e)] = sum;
    }
  }
}

AgentShape small_shape(std::size_t f) {
  AgentShape s;
  s.num_features = f;
  s.hidden = 32;
  s.policy_layers = 3;
  s.value_layers = 2;
  return s;
}

PpoConfig small_cfg() {
  PpoConfig c;
  c.parallel_envs = 8;
  c.steps_per_env = 16;
  c.batch = 64;
  c.update_steps = 4;
  c.lr = 1e-3;
  c.train_epochs = 3;
  c.eval_every = 2;
  c.eval_goals = 20;
  return c;
}

SyntheticSpec toy_spec() {
  SyntheticSpec s;
  s.nodes = 30;
  s.features = 12;
  s.labels = 2;
  return s;
}

}  // namespace

TEST_CASE("policy distribution: mask law and subset-softmax oracle") {
  const std::vector<double> eq(5, 0.3);
  const auto p = policy_distribution(eq, std::vector<std::uint8_t>{1, 1, 0, 0, 0});
  CHECK(p == std::vector<double>{0.5, 0.5, 0.0, 0.0, 0.0});
  const auto one = policy_distribution(std::vector<double>{4, -1, 2}, std::vector<std::uint8_t>{0, 1, 0});
  CHECK(one == std::vector<double>{0.0, 1.0, 0.0});
  CHECK_THROWS_AS(policy_distribution(eq, std::vector<std::uint8_t>(5, 0)), DomainError);

  Rng rng(7);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t f = 1 + uniform_index(rng, 20);
    std::vector<double> logits(f);
    std::vector<std::uint8_t> mask(f);
    for (auto& l : logits) l = 10.0 * standard_normal(rng);
    for (auto& m : mask) m = uniform01(rng) < 0.5;
    mask[uniform_index(rng, f)] = 1;
    // oracle: softmax of the unmasked subset, scattered back
    double mx = -1e300, z = 0.0;
    for (std::size_t i = 0; i < f; ++i)
      if (mask[i]) mx = std::max(mx, logits[i]);
    for (std::size_t i = 0; i < f; ++i)
      if (mask[i]) z += std::exp(logits[i] - mx);
    const auto got = policy_distribution(logits, mask);
    double total = 0.0;
    for (std::size_t i = 0; i < f; ++i) {
      const double want = mask[i] ? std::exp(logits[i] - mx) / z : 0.0;
      CHECK(oracle::rel_err(got[i], want) < 1e-12);
      if (!mask[i]) CHECK(got[i] == 0.0);
      total += got[i];
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    // entropy bound ln(popcount)
    const double k = std::accumulate(mask.begin(), mask.end(), 0.0);
    CHECK(entropy(got) <= std::log(k) + 1e-12);
  }
  // equality iff uniform over the unmasked set
  const std::vector<std::uint8_t> m{1, 0, 1, 1};
  CHECK(entropy(policy_distribution(std::vector<double>(4, -2.0), m)) == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  CHECK(entropy(policy_distribution(std::vector<double>{0, 0, 0, 0.1}, m)) < std::log(3.0) - 1e-6);
}

TEST_CASE("greedy and Gumbel-max sampling") {
  CHECK(greedy_action(std::vector<double>{0.1, 0.7, 0.2}) == 1);
  CHECK(greedy_action(std::vector<double>{0.4, 0.2, 0.4}) == 0);
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) CHECK(sample_action(std::vector<double>{0.0, 0.0, 1.0, 0.0}, rng) == 2);

  const std::vector<double> p{0.2, 0.3, 0.5};
  const int n = 100000;
  std::vector<int> counts(3, 0);
  for (int i = 0; i < n; ++i) ++counts[sample_action(p, rng)];
  for (std::size_t k = 0; k < 3; ++k) {
    const double sigma = std::sqrt(n * p[k] * (1 - p[k]));
    CHECK(std::abs(counts[k] - n * p[k]) < 3 * sigma);
  }
}

TEST_CASE("masked actions are never sampled in one million draws") {
  Rng rng(3);
  const std::size_t f = 10;
  std::vector<double> logits(f);
  for (auto& l : logits) l = standard_normal(rng);
  std::vector<std::uint8_t> mask{1, 0, 1, 0, 0, 1, 0, 1, 0, 0};
  logits[1] = 50.0;  // a masked entry with a huge logit
  const auto lp = ad::masked_log_softmax_rows(ad::Tensor(1, f, logits), mask);
  std::vector<int> counts(f, 0);
  for (int i = 0; i < 1000000; ++i) ++counts[sample_from_log_probs(lp.values(), rng)];
  for (std::size_t i = 0; i < f; ++i) {
    if (!mask[i]) CHECK(counts[i] == 0);
    else CHECK(counts[i] > 0);
  }
}

TEST_CASE("GAE: worked examples") {
  RolloutBuffer b;
  b.reset(1, 2, 1, 1);
  b.rewards = {1.0, 1.0};
  compute_gae(b, 0.99, 0.95);
  CHECK(b.advantages[1] == 1.0);
  CHECK(b.advantages[0] == doctest::Approx(1.9405).epsilon(1e-15));
  CHECK(b.returns == b.advantages);

  b.values = {0.3, -0.2};
  b.bootstrap = {0.7};
  compute_gae(b, 0.99, 0.0);
  CHECK(b.advantages[0] == 1.0 + 0.99 * -0.2 - 0.3);
  CHECK(b.advantages[1] == 1.0 + 0.99 * 0.7 + 0.2);

  b.reset(3, 4, 1, 1);
  compute_gae(b, 0.99, 0.95);
  for (std::size_t i = 0; i < b.size(); ++i) CHECK((b.advantages[i] == 0.0 && b.returns[i] == 0.0));
}

TEST_CASE("GAE recursion equals the direct double sum") {
  Rng rng(5);
  std::vector<double> want;
  for (int rep = 0; rep < 300; ++rep) {
    RolloutBuffer b;
    b.reset(1 + uniform_index(rng, 4), 1 + uniform_index(rng, 40), 1, 1);
    for (std::size_t i = 0; i < b.size(); ++i) {
      b.rewards[i] = standard_normal(rng);
      b.values[i] = standard_normal(rng);
      b.dones[i] = uniform01(rng) < 0.15;
    }
    for (auto& v : b.bootstrap) v = standard_normal(rng);
    const double gamma = 0.5 + 0.5 * uniform01(rng), lambda = uniform01(rng);
    compute_gae(b, gamma, lambda);
    gae_oracle(b, gamma, lambda, want);
    for (std::size_t i = 0; i < b.size(); ++i) {
      CHECK(oracle::rel_err(b.advantages[i], want[i]) < 1e-12);
      CHECK(b.returns[i] == b.advantages[i] + b.values[i]);
    }
  }
}

TEST_CASE("clip function and value-loss branches") {
  CHECK(clip_value(1.3, 0.9, 1.1) == 1.1);
  CHECK(clip_value(0.5, 0.9, 1.1) == 0.9);
  CHECK(clip_value(1.0, 0.9, 1.1) == 1.0);
  const auto h = ad::huber(ad::Tensor(1, 4, std::vector<double>{0.5, -2.0, 1.0, -1.0}));
  CHECK(h.values()[0] == 0.125);
  CHECK(h.values()[1] == 1.5);
  // continuous at the transition point
  CHECK(h.values()[2] == 0.5);
  CHECK(h.values()[3] == 0.5);
}

TEST_CASE("PpoConfig validation") {
  PpoConfig c;
  CHECK_NOTHROW(c.validate());
  c.clip = 1.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.batch = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.gamma = 0.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("networks: shapes, init gains and checkpoint round trip") {
  AgentShape s = small_shape(7);
  Agent a(s, 42);
  ad::Tensor x(5, 14);
  Rng rng(1);
  for (auto& v : x.mutable_values()) v = standard_normal(rng);
  CHECK(a.policy_logits(x).rows() == 5);
  CHECK(a.policy_logits(x).cols() == 7);
  CHECK(a.values(x).cols() == 1);
  // orthogonal rows or columns, scaled by the gain
  const auto w = orthogonal_init(6, 4, 2.0, rng);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      double dot = 0.0;
      for (std::size_t r = 0; r < 6; ++r) dot += w[r * 4 + i] * w[r * 4 + j];
      CHECK(dot == doctest::Approx(i == j ? 4.0 : 0.0).epsilon(1e-12).scale(1.0));
    }
  const Agent b = Agent::from_checkpoint(a.to_checkpoint());
  CHECK(b.policy_logits(x).values()[3] == a.policy_logits(x).values()[3]);
  CHECK(b.values(x).values()[4] == a.values(x).values()[4]);
  const Agent c(s, 42);
  CHECK(c.policy_logits(x).values()[0] == a.policy_logits(x).values()[0]);
}

TEST_CASE("first update of a phase sees ratio 1 and unclipped PPO gradient equals vanilla PG") {
  auto toy = testutil::make_toy(toy_spec(), 3);
  AttackEnv env(*toy.graph, *toy.oracle, 3);
  const auto shape = small_shape(toy.graph->num_features());
  Agent agent(shape, 9);
  PpoConfig cfg = small_cfg();
  Collector col = make_collector(env, toy.split.targets, cfg.parallel_envs, 9);
  RolloutBuffer buf;
  collect(agent, env, toy.bank, toy.split.targets, col, buf, cfg.steps_per_env);
  compute_gae(buf, cfg.gamma, cfg.lambda);
  CHECK(buf.size() == 128);

  std::vector<std::size_t> idx(buf.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  PpoConfig wide = cfg;
  wide.clip = 1e9;
  wide.normalize_advantages = false;
  const PpoLosses l = ppo_losses(agent, buf, idx, wide);
  for (double r : l.ratio.values()) CHECK(r == 1.0);

  const auto params = agent.parameter_tensors();
  ad::backward(l.policy);
  std::vector<std::vector<double>> g_ppo;
  for (const auto& p : params) g_ppo.emplace_back(p.grad().begin(), p.grad().end());
  for (auto p : params) p.zero_grad();

  // vanilla: -mean(log pi(a|s) * A)
  ad::Tensor states(buf.size(), buf.state_dim, buf.states);
  std::vector<std::size_t> actions(buf.actions.begin(), buf.actions.end());
  const auto lp = ad::pick(ad::masked_log_softmax_rows(agent.policy_logits(states), buf.masks), actions);
  ad::backward(ad::scale(ad::mean(ad::hadamard(lp, ad::Tensor(buf.size(), 1, buf.advantages))), -1.0));
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k)
    for (std::size_t i = 0; i < g_ppo[k].size(); ++i) worst = std::max(worst, oracle::rel_err(g_ppo[k][i], params[k].grad()[i]));
  CHECK(worst < 1e-12);

  ad::Adam opt(agent.parameter_tensors(), ad::AdamConfig::linear_decay(cfg.lr, 100));
  Rng urng(1);
  const auto stats = ppo_update(agent, opt, buf, cfg, urng);
  CHECK(stats.first_ratio_deviation == 0.0);
  CHECK(stats.minibatches == cfg.update_steps);
  CHECK(std::isfinite(stats.policy_loss));
}

TEST_CASE("one-epoch training completes and a fixed seed reproduces the log") {
  auto toy = testutil::make_toy(toy_spec(), 4);
  AttackEnv env(*toy.graph, *toy.oracle, 3);
  PpoConfig cfg = small_cfg();
  cfg.train_epochs = 1;
  const auto r1 = train_agent(env, toy.bank, toy.split.targets, small_shape(12), cfg, 5);
  CHECK(r1.log.size() == 1);
  CHECK(r1.log[0].eval_success.has_value());
  CHECK(r1.best_epoch == 1);

  cfg.train_epochs = 4;
  std::ostringstream a, b;
  train_agent(env, toy.bank, toy.split.targets, small_shape(12), cfg, 5, &a);
  train_agent(env, toy.bank, toy.split.targets, small_shape(12), cfg, 5, &b);
  CHECK(a.str() == b.str());
  const std::string log = a.str();
  CHECK(std::count(log.begin(), log.end(), '\n') == 4);
  cfg.workers = 3;
  std::ostringstream c;
  train_agent(env, toy.bank, toy.split.targets, small_shape(12), cfg, 5, &c);
  CHECK(c.str() == a.str());
}

TEST_CASE("goal grids") {
  const std::vector<NodeId> t{4, 9};
  const auto g = goal_grid(t, 3);
  REQUIRE(g.size() == 6);
  CHECK(g[4] == AttackGoal{9, 1});
  CHECK(capped_goal_grid(t, 3, 6, 1) == g);
  const auto c = capped_goal_grid(t, 3, 4, 1);
  CHECK(c.size() == 4);
  CHECK(std::is_sorted(c.begin(), c.end(), [](auto& a, auto& b) { return a.target < b.target || (a.target == b.target && a.label < b.label); }));
  CHECK(c == capped_goal_grid(t, 3, 4, 1));
}

TEST_CASE("trained agent beats the random baseline on a toy graph") {
  auto toy = testutil::make_toy(toy_spec(), 8);
  const std::size_t budget = 3;
  AttackEnv env(*toy.graph, *toy.oracle, budget);
  PpoConfig cfg = small_cfg();
  cfg.train_epochs = 200;
  cfg.eval_every = 20;
  cfg.eval_goals = 1000;
  cfg.update_steps = 8;
  const auto result = train_agent(env, toy.bank, toy.split.targets, small_shape(12), cfg, 8);

  const auto goals = goal_grid(toy.split.targets, toy.graph->num_labels());
  const double agent_rate = greedy_success_rate(result.best, env, toy.bank, goals);
  const auto preds = toy.victim->clean_predictions();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < goals.size(); ++i) {
    Rng rng = derive_rng(8, "random-" + std::to_string(i));
    const auto ig = random_attack(*toy.graph, preds, goals[i], budget, rng);
    hits += argmax(toy.victim->query_row(ig)) == goals[i].label;
  }
  const double random_rate = static_cast<double>(hits) / static_cast<double>(goals.size());
  MESSAGE("agent " << agent_rate << " random " << random_rate);
  CHECK(agent_rate > random_rate);
}
