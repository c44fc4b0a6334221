#include "gnninject/env/attack_env.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gnninject/core/errors.hpp"

namespace gnninject {

LabelBank build_label_bank(const Graph& g, std::span<const LabelId> predictions) {
  if (predictions.size() != g.num_nodes()) {
    throw DimensionError("label bank: " + std::to_string(predictions.size()) + " predictions for " +
                         std::to_string(g.num_nodes()) + " nodes");
  }
  LabelBank bank(g.num_labels(), g.num_features());
  std::vector<double> inv_sqrt(g.num_nodes());
  for (NodeId u = 0; u < g.num_nodes(); ++u) inv_sqrt[u] = 1.0 / std::sqrt(static_cast<double>(g.degree(u) + 1));
  std::vector<std::size_t> count(g.num_labels(), 0);
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    const LabelId y = predictions[u];
    if (y >= g.num_labels()) throw ValidationError("label bank: prediction out of range for node " + std::to_string(u));
    ++count[y];
    auto row = bank.mutable_row(y);
    const double self = inv_sqrt[u] * inv_sqrt[u];
    for (FeatureId f : g.features(u)) row[f] += self;
    for (NodeId v : g.neighbors(u)) {
      const double a = inv_sqrt[u] * inv_sqrt[v];
      for (FeatureId f : g.features(v)) row[f] += a;
    }
  }
  for (LabelId y = 0; y < g.num_labels(); ++y) {
    bank.set_group_size(y, count[y]);
    if (count[y] == 0) continue;
    for (double& v : bank.mutable_row(y)) v /= static_cast<double>(count[y]);
  }
  return bank;
}

LabelBank build_label_bank(const Graph& g, const VictimOracle& victim) {
  const auto pred = victim.clean_predictions();
  return build_label_bank(g, pred);
}

void embed_state(const EpisodeState& st, const LabelBank& bank, std::span<double> out) {
  const InjectedGraph& ig = st.injected;
  const Graph& g = ig.base();
  const std::size_t f = g.num_features();
  if (out.size() != 2 * f) throw DimensionError("embed_state: output needs length 2F");
  std::fill(out.begin(), out.begin() + f, 0.0);
  const NodeId t = ig.target();
  // Every neighbour of the target keeps all its edges inside the 2-hop
  // subgraph, so subgraph degrees equal degrees in the injected graph.
  const double dt = static_cast<double>(g.degree(t) + 2);
  for (FeatureId j : g.features(t)) out[j] += 1.0 / dt;
  for (NodeId u : g.neighbors(t)) {
    const double a = 1.0 / std::sqrt(dt * static_cast<double>(g.degree(u) + 1));
    for (FeatureId j : g.features(u)) out[j] += a;
  }
  const double a_inj = 1.0 / std::sqrt(dt * 2.0);
  for (FeatureId j : ig.features()) out[j] += a_inj;
  const auto l = bank.row(st.goal.label);
  std::copy(l.begin(), l.end(), out.begin() + f);
}

std::vector<double> embed_state(const EpisodeState& st, const LabelBank& bank) {
  std::vector<double> out(2 * st.injected.base().num_features());
  embed_state(st, bank, out);
  return out;
}

AttackEnv::AttackEnv(const Graph& g, const VictimOracle& victim, std::size_t budget)
    : graph_(&g), victim_(&victim), budget_(budget) {
  if (victim.num_labels() != g.num_labels()) throw DimensionError("victim and graph disagree on the label count");
}

EpisodeState AttackEnv::reset(const AttackGoal& goal) const {
  if (goal.target >= graph_->num_nodes()) throw ValidationError("goal target " + std::to_string(goal.target) + " out of range");
  if (goal.label >= graph_->num_labels()) throw ValidationError("goal label " + std::to_string(goal.label) + " out of range");
  EpisodeState st{goal, 0, InjectedGraph(*graph_, goal.target, budget_), std::vector<std::uint8_t>(graph_->num_features(), 1),
                  {}, 0.0};
  st.last_row = victim_->query_row(st.injected);
  st.last_prob = st.last_row[goal.label];
  return st;
}

StepResult AttackEnv::step(EpisodeState& st, FeatureId a) const {
  if (st.done()) throw EpisodeFinished("episode already used its budget of " + std::to_string(st.injected.budget()));
  if (a >= st.mask.size() || st.mask[a] == 0) {
    throw ContractViolation("action " + std::to_string(a) + " is masked or out of range");
  }
  st.injected.add_feature(a);
  st.mask[a] = 0;
  ++st.step;
  st.last_row = victim_->query_row(st.injected);
  const double p_new = st.last_row[st.goal.label];
  const double reward = std::log(p_new) - std::log(st.last_prob);
  st.last_prob = p_new;
  return {reward, st.done()};
}

bool AttackEnv::success(const EpisodeState& st) const {
  if (!st.done()) throw UsageError("success() requires a finished episode");
  return argmax(st.last_row) == st.goal.label;
}

}  // namespace gnninject
