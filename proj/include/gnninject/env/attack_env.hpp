#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gnninject/graph/graph.hpp"
#include "gnninject/graph/injected_graph.hpp"
#include "gnninject/models/oracle.hpp"

namespace gnninject {

struct AttackGoal {
  NodeId target = 0;
  LabelId label = 0;

  friend bool operator==(const AttackGoal&, const AttackGoal&) = default;
};

/// Mean of the rows of H = Â X over the nodes the victim assigns to each
/// label. A label nobody is assigned to keeps a zero row.
class LabelBank {
 public:
  LabelBank() = default;
  LabelBank(std::size_t num_labels, std::size_t num_features)
      : num_features_(num_features), rows_(num_labels * num_features, 0.0), group_sizes_(num_labels, 0) {}

  std::size_t num_labels() const { return group_sizes_.size(); }
  std::size_t num_features() const { return num_features_; }
  std::span<const double> row(LabelId y) const { return {rows_.data() + std::size_t(y) * num_features_, num_features_}; }
  std::span<double> mutable_row(LabelId y) { return {rows_.data() + std::size_t(y) * num_features_, num_features_}; }
  std::size_t group_size(LabelId y) const { return group_sizes_[y]; }
  void set_group_size(LabelId y, std::size_t n) { group_sizes_[y] = n; }

 private:
  std::size_t num_features_ = 0;
  std::vector<double> rows_;
  std::vector<std::size_t> group_sizes_;
};

LabelBank build_label_bank(const Graph& g, std::span<const LabelId> predictions);
LabelBank build_label_bank(const Graph& g, const VictimOracle& victim);

/// One attack episode. `mask[f] == 1` while feature f is still selectable;
/// `step` features have been placed so far.
struct EpisodeState {
  AttackGoal goal;
  std::size_t step = 0;
  InjectedGraph injected;
  std::vector<std::uint8_t> mask;
  /// Victim probability row of the target on the current injected graph.
  ProbRow last_row;
  double last_prob = 0.0;

  bool done() const { return step >= injected.budget(); }
};

/// Length-2F state vector: the target's aggregated features on the current
/// injected graph followed by the label-bank row of the targeted label.
/// Takes no victim argument: only graph data and the bank are read.
void embed_state(const EpisodeState& st, const LabelBank& bank, std::span<double> out);
std::vector<double> embed_state(const EpisodeState& st, const LabelBank& bank);

struct StepResult {
  double reward = 0.0;
  bool done = false;
};

/// Single-node injection MDP over a fixed graph and black-box victim.
/// Episodes last exactly `budget` steps. Stateless apart from the victim's
/// query counter, so one instance can drive many episodes concurrently.
class AttackEnv {
 public:
  AttackEnv(const Graph& g, const VictimOracle& victim, std::size_t budget);

  const Graph& graph() const { return *graph_; }
  const VictimOracle& victim() const { return *victim_; }
  std::size_t budget() const { return budget_; }

  /// Throws ValidationError for an out-of-range goal.
  EpisodeState reset(const AttackGoal& goal) const;
  /// Places feature `a`; the reward is ln p_new - ln p_old for the targeted
  /// label. Throws ContractViolation for a masked action and EpisodeFinished
  /// once the budget is spent.
  StepResult step(EpisodeState& st, FeatureId a) const;
  /// Victim argmax at the target equals the targeted label (ties to the
  /// lowest label). Throws UsageError before the episode ends.
  bool success(const EpisodeState& st) const;

 private:
  const Graph* graph_;
  const VictimOracle* victim_;
  std::size_t budget_;
};

}  // namespace gnninject
