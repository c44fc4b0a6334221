#include "gnninject/baselines/baselines.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "gnninject/core/errors.hpp"
#include "gnninject/core/log.hpp"

namespace gnninject {

std::vector<FeatureId> top_k_features(std::span<const double> scores, std::size_t k,
                                      std::span<const std::uint8_t> exclude) {
  if (!exclude.empty() && exclude.size() != scores.size()) throw DimensionError("exclude mask length differs from scores");
  std::vector<FeatureId> idx;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (exclude.empty() || exclude[i] == 0) idx.push_back(static_cast<FeatureId>(i));
  }
  k = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), [&](FeatureId a, FeatureId b) {
    return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
  });
  idx.resize(k);
  return idx;
}

std::vector<NodeId> prediction_group(std::span<const LabelId> predictions, LabelId y) {
  std::vector<NodeId> out;
  for (std::size_t u = 0; u < predictions.size(); ++u) {
    if (predictions[u] == y) out.push_back(static_cast<NodeId>(u));
  }
  return out;
}

namespace {

void check_goal(const Graph& g, std::span<const LabelId> predictions, const AttackGoal& goal) {
  if (predictions.size() != g.num_nodes()) throw DimensionError("one prediction per node required");
  if (goal.target >= g.num_nodes() || goal.label >= g.num_labels()) throw ValidationError("attack goal out of range");
}

}  // namespace

InjectedGraph random_attack(const Graph& g, std::span<const LabelId> predictions, const AttackGoal& goal,
                            std::size_t budget, Rng& rng) {
  check_goal(g, predictions, goal);
  InjectedGraph ig(g, goal.target, budget);
  const auto group = prediction_group(predictions, goal.label);
  if (group.empty()) {
    log::warn("random attack: no node predicted as label " + std::to_string(goal.label) +
              "; drawing uniform features instead");
    std::vector<FeatureId> all(g.num_features());
    std::iota(all.begin(), all.end(), FeatureId{0});
    const std::size_t k = std::min(budget, all.size());
    for (std::size_t i = 0; i < k; ++i) {
      std::swap(all[i], all[i + uniform_index(rng, all.size() - i)]);
      ig.add_feature(all[i]);
    }
    return ig;
  }
  const NodeId src = group[uniform_index(rng, group.size())];
  const auto feats = g.features(src);  // sorted ascending
  for (std::size_t i = 0; i < std::min(budget, feats.size()); ++i) ig.add_feature(feats[i]);
  return ig;
}

InjectedGraph mostattr_attack(const Graph& g, std::span<const LabelId> predictions, const AttackGoal& goal,
                              std::size_t budget) {
  check_goal(g, predictions, goal);
  std::vector<double> counts(g.num_features(), 0.0);
  for (NodeId u : prediction_group(predictions, goal.label)) {
    for (FeatureId f : g.features(u)) counts[f] += 1.0;
  }
  InjectedGraph ig(g, goal.target, budget);
  for (FeatureId f : top_k_features(counts, budget)) ig.add_feature(f);
  return ig;
}

namespace {

void check_grad_model(const Graph& g, const VictimModel& m, const AttackGoal& goal) {
  if (!m.is_bound() || &m.graph() != &g) throw ContractViolation("gradient model must be bound to the attacked graph");
  if (goal.target >= g.num_nodes() || goal.label >= g.num_labels()) throw ValidationError("attack goal out of range");
}

}  // namespace

InjectedGraph oneshot_grad_attack(const Graph& g, const VictimModel& grad_model, const AttackGoal& goal,
                                  std::size_t budget) {
  check_grad_model(g, grad_model, goal);
  InjectedGraph ig(g, goal.target, budget);
  const auto grad = grad_model.feature_gradient(ig, goal.label);
  for (FeatureId f : top_k_features(grad, budget)) ig.add_feature(f);
  return ig;
}

InjectedGraph greedy_grad_attack(const Graph& g, const VictimModel& grad_model, const AttackGoal& goal,
                                 std::size_t budget) {
  check_grad_model(g, grad_model, goal);
  InjectedGraph ig(g, goal.target, budget);
  std::vector<std::uint8_t> taken(g.num_features(), 0);
  const std::size_t rounds = std::min(budget, g.num_features());
  for (std::size_t r = 0; r < rounds; ++r) {
    const auto grad = grad_model.feature_gradient(ig, goal.label);
    const FeatureId f = top_k_features(grad, 1, taken).front();
    taken[f] = 1;
    ig.add_feature(f);
  }
  return ig;
}

}  // namespace gnninject
