#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gnninject/core/rng.hpp"
#include "gnninject/env/attack_env.hpp"
#include "gnninject/graph/injected_graph.hpp"
#include "gnninject/models/victim.hpp"

namespace gnninject {

/// The k largest scores, ties to the lower index, skipping indices where
/// `exclude` is nonzero. Returned in selection order.
std::vector<FeatureId> top_k_features(std::span<const double> scores, std::size_t k,
                                      std::span<const std::uint8_t> exclude = {});

/// Nodes whose clean prediction is y.
std::vector<NodeId> prediction_group(std::span<const LabelId> predictions, LabelId y);

/// Copies the features of a node drawn uniformly from the prediction group
/// of goal.label, keeping its `budget` lowest feature indices. An empty group
/// falls back to `budget` uniformly drawn features (logged).
InjectedGraph random_attack(const Graph& g, std::span<const LabelId> predictions, const AttackGoal& goal,
                            std::size_t budget, Rng& rng);

/// The `budget` most frequent features over the prediction group of
/// goal.label, ties to the lower index.
InjectedGraph mostattr_attack(const Graph& g, std::span<const LabelId> predictions, const AttackGoal& goal,
                              std::size_t budget);

/// One gradient of Z[target, label] at the empty injection; sets the top
/// `budget` entries. `grad_model` is the victim (white-box) or a surrogate
/// (black-box) bound to g.
InjectedGraph oneshot_grad_attack(const Graph& g, const VictimModel& grad_model, const AttackGoal& goal,
                                  std::size_t budget);

/// `budget` rounds; each recomputes the gradient at the current injection and
/// adds the unselected feature with the largest entry.
InjectedGraph greedy_grad_attack(const Graph& g, const VictimModel& grad_model, const AttackGoal& goal,
                                 std::size_t budget);

}  // namespace gnninject
