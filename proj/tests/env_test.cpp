#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "gnninject/core/errors.hpp"
#include "gnninject/core/rng.hpp"
#include "gnninject/env/attack_env.hpp"
#include "gnninject/graph/synthetic.hpp"
#include "support/env_oracle.hpp"

using namespace gnninject;

namespace {

/// Returns a fixed row for every query.
class FixedOracle final : public VictimOracle {
 public:
  explicit FixedOracle(ProbRow row) : row_(std::move(row)) {}
  std::size_t num_labels() const override { return row_.size(); }
  ProbRow query_row(const InjectedGraph&) const override { return row_; }
  ProbRow clean_row(NodeId) const override { return row_; }
  std::vector<LabelId> clean_predictions() const override { return {}; }

 private:
  ProbRow row_;
};

VictimModel random_victim(const Graph& g, std::uint64_t seed) {
  auto arch = GnnArchitecture::defaults(ArchKind::kGcn);
  arch.hidden = 6;
  VictimModel m(arch, g.num_features(), g.num_labels(), seed);
  for (auto& [n, t] : m.params())
    for (auto& v : t.mutable_values()) v *= 3.0;
  m.freeze();
  m.bind(g);
  return m;
}

Graph toy(std::uint64_t seed, std::size_t nodes = 10) {
  SyntheticSpec spec;
  spec.nodes = nodes;
  spec.features = 8;
  spec.labels = 3;
  spec.p_in = 0.4;
  spec.p_out = 0.1;
  return make_synthetic_graph(spec, seed);
}

}  // namespace

TEST_CASE("reset gives an empty injection with a full mask") {
  const auto g = toy(1);
  const auto m = random_victim(g, 2);
  ModelOracle o(m);
  AttackEnv env(g, o, 3);
  const auto st = env.reset({2, 1});
  CHECK(st.injected.num_injected_features() == 0);
  CHECK(std::accumulate(st.mask.begin(), st.mask.end(), 0) == int(g.num_features()));
  const auto st2 = env.reset({2, 1});
  CHECK(st2.last_row == st.last_row);
  const auto want = oracle::forward_probs(m, st.injected.materialize());
  CHECK(std::abs(st.last_prob - want[2][1]) < 1e-12);
  CHECK_THROWS_AS(env.reset({NodeId(g.num_nodes()), 0}), ValidationError);
  CHECK_THROWS_AS(env.reset({0, 3}), ValidationError);
}

TEST_CASE("step enforces the mask and the budget") {
  const auto g = toy(1);
  const auto m = random_victim(g, 2);
  ModelOracle o(m);
  AttackEnv env(g, o, 2);
  auto st = env.reset({0, 0});
  CHECK_THROWS_AS(env.success(st), UsageError);
  CHECK(!env.step(st, 3).done);
  CHECK_THROWS_AS(env.step(st, 3), ContractViolation);
  CHECK_THROWS_AS(env.step(st, 99), ContractViolation);
  CHECK(env.step(st, 4).done);
  CHECK_THROWS_AS(env.step(st, 5), EpisodeFinished);
  CHECK(st.injected.num_injected_features() == 2);
}

TEST_CASE("reward equals the dense log-ratio on a hand-weighted four-node graph") {
  const std::vector<std::pair<NodeId, NodeId>> e = {{0, 1}, {1, 2}, {2, 3}};
  const auto g = Graph::build(4, 3, 2, e, {{0}, {1}, {2}, {0, 2}}, {0, 1, 0, 1});
  auto arch = GnnArchitecture::defaults(ArchKind::kGcn);
  arch.hidden = 2;
  VictimModel m(arch, 3, 2, 0);
  const double w1[] = {1.0, -0.5, 0.3, 2.0, -1.0, 0.7};
  const double w2[] = {1.5, -1.0, -0.4, 0.8};
  std::copy(std::begin(w1), std::end(w1), m.params()[0].second.mutable_values().begin());
  std::copy(std::begin(w2), std::end(w2), m.params()[1].second.mutable_values().begin());
  m.freeze();
  m.bind(g);
  ModelOracle o(m);
  AttackEnv env(g, o, 2);
  auto st = env.reset({1, 0});
  const double p0 = oracle::forward_probs(m, st.injected.materialize())[1][0];
  const auto r = env.step(st, 2);
  const double p1 = oracle::forward_probs(m, st.injected.materialize())[1][0];
  CHECK(std::abs(r.reward - (std::log(p1) - std::log(p0))) < 1e-12);
}

TEST_CASE("an action that leaves the probability unchanged earns zero") {
  const auto g = toy(3);
  FixedOracle o({0.2, 0.5, 0.3});
  AttackEnv env(g, o, 2);
  auto st = env.reset({0, 1});
  CHECK(env.step(st, 0).reward == 0.0);
}

TEST_CASE("success uses argmax with lowest-label ties") {
  const auto g = toy(3);
  FixedOracle hit({0.0, 1.0, 0.0}), miss({1.0, 0.0, 0.0}), tie({1.0 / 3, 1.0 / 3, 1.0 / 3});
  auto run = [&](const VictimOracle& o, LabelId y) {
    AttackEnv env(g, o, 1);
    auto st = env.reset({0, y});
    env.step(st, 0);
    return env.success(st);
  };
  CHECK(run(hit, 1));
  CHECK(!run(miss, 1));
  CHECK(run(tie, 0));
  CHECK(!run(tie, 2));
}

TEST_CASE("telescoping, mask bijection and episode length") {
  Rng rng(17);
  for (int ep = 0; ep < 100; ++ep) {
    const auto g = toy(rng(), 8 + uniform_index(rng, 8));
    const auto m = random_victim(g, rng());
    ModelOracle o(m);
    const std::size_t budget = 1 + uniform_index(rng, g.num_features());
    AttackEnv env(g, o, budget);
    auto st = env.reset({NodeId(uniform_index(rng, g.num_nodes())), LabelId(uniform_index(rng, g.num_labels()))});
    const double l0 = std::log(st.last_prob);
    double total = 0.0;
    std::size_t steps = 0;
    bool done = false;
    while (!done) {
      FeatureId a;
      do a = FeatureId(uniform_index(rng, g.num_features())); while (!st.mask[a]);
      const auto r = env.step(st, a);
      total += r.reward;
      done = r.done;
      ++steps;
      CHECK(std::size_t(std::count(st.mask.begin(), st.mask.end(), 0)) == steps);
      CHECK(st.injected.num_injected_features() == steps);
    }
    CHECK(steps == budget);
    CHECK(std::abs(total - (std::log(st.last_prob) - l0)) < 1e-12);
  }
}

TEST_CASE("label bank: singletons, empty groups and the dense oracle") {
  const std::vector<std::pair<NodeId, NodeId>> e = {{0, 1}};
  const auto g2 = Graph::build(2, 2, 3, e, {{0}, {1}}, {0, 1});
  const auto b2 = build_label_bank(g2, std::vector<LabelId>{0, 1});
  CHECK(b2.row(0)[0] == doctest::Approx(0.5));
  CHECK(b2.row(0)[1] == doctest::Approx(0.5));
  CHECK(b2.group_size(2) == 0);
  for (double v : b2.row(2)) CHECK(v == 0.0);

  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    SyntheticSpec spec;
    spec.nodes = 6;
    spec.features = 5;
    spec.labels = 2;
    const auto g = make_synthetic_graph(spec, rng());
    std::vector<LabelId> pred(6);
    for (auto& p : pred) p = LabelId(uniform_index(rng, 2));
    const auto bank = build_label_bank(g, pred);
    const auto want = oracle::label_bank(g, pred);
    for (LabelId y = 0; y < 2; ++y)
      for (std::size_t j = 0; j < 5; ++j) CHECK(std::abs(bank.row(y)[j] - want[y][j]) < 1e-12);
  }
}

TEST_CASE("embedding: forced pendant case and the subgraph oracle") {
  const auto g = Graph::build(1, 3, 1, {}, {{0, 2}}, {0});
  FixedOracle o({1.0});
  AttackEnv env(g, o, 2);
  auto st = env.reset({0, 0});
  env.step(st, 1);
  const auto bank = build_label_bank(g, std::vector<LabelId>{0});
  const auto emb = embed_state(st, bank);
  CHECK(emb[0] == doctest::Approx(0.5));
  CHECK(emb[1] == doctest::Approx(0.5));
  CHECK(emb[2] == doctest::Approx(0.5));

  Rng rng(8);
  for (int t = 0; t < 50; ++t) {
    const auto gg = toy(rng(), 8);
    const auto m = random_victim(gg, rng());
    ModelOracle mo(m);
    AttackEnv e2(gg, mo, 4);
    auto s = e2.reset({NodeId(uniform_index(rng, 8)), LabelId(uniform_index(rng, 3))});
    for (int k = 0; k < 3; ++k) {
      FeatureId a;
      do a = FeatureId(uniform_index(rng, gg.num_features())); while (!s.mask[a]);
      e2.step(s, a);
    }
    const auto b = build_label_bank(gg, mo);
    const auto got = embed_state(s, b);
    const auto want = oracle::embedding(s, b);
    for (std::size_t j = 0; j < got.size(); ++j) CHECK(std::abs(got[j] - want[j]) < 1e-12);
  }
}
