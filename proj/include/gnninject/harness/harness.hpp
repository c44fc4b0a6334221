#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "gnninject/agent/networks.hpp"
#include "gnninject/env/attack_env.hpp"
#include "gnninject/models/victim.hpp"

namespace gnninject {

enum class AttackerKind { kClean, kRandom, kMostAttr, kOneShot, kGreedy, kGsnia };
enum class GradSource { kNone, kVictim, kSurrogate };

struct AttackerSpec {
  AttackerKind kind = AttackerKind::kClean;
  GradSource grad = GradSource::kNone;

  /// "clean", "random", "mostattr", "gsnia", "oneshot-victim", "greedy-surrogate", ...
  std::string name() const;
};

/// Accepts the short names above, and bare "oneshot"/"greedy" with the
/// separate `grad_source` ("victim" or "surrogate"). Throws UsageError.
AttackerSpec parse_attacker(const std::string& name, const std::string& grad_source = "victim");

/// Everything an attacker may need. Pointers not needed by the chosen
/// attacker may be null; run_attack throws UsageError when a needed one is.
struct AttackResources {
  const Graph* graph = nullptr;
  /// Queried for final success only (and per step by gsnia).
  const VictimModel* victim = nullptr;
  std::string victim_name = "victim";
  const VictimModel* surrogate = nullptr;
  const Agent* agent = nullptr;
  /// Built from the victim's clean predictions.
  const LabelBank* bank = nullptr;
  /// Victim clean predictions (prediction groups for random and mostattr).
  std::vector<LabelId> predictions;
  std::size_t budget = 0;
  std::uint64_t seed = 0;
  bool timing = false;
};

struct AttackReport {
  std::size_t goal_index = 0;
  NodeId target = 0;
  LabelId label = 0;
  /// Victim prediction for the target on the clean graph.
  LabelId clean_label = 0;
  std::string attacker;
  std::string victim;
  bool success = false;
  double clean_prob = 0.0;
  double final_prob = 0.0;
  /// final_prob - clean_prob.
  double delta_prob = 0.0;
  std::size_t steps = 0;
  std::vector<FeatureId> features;
  std::uint64_t queries = 0;
  std::optional<double> wall_ms;
};

/// Random uses the stream derive_rng(seed, "random-attack-<goal_index>").
AttackReport run_attack(const AttackResources& res, const AttackerSpec& spec, const AttackGoal& goal,
                        std::size_t goal_index);

/// Reports in goal order.
std::vector<AttackReport> run_attacks(const AttackResources& res, const AttackerSpec& spec,
                                      std::span<const AttackGoal> goals, std::size_t workers = 1);

/// `count` targets drawn uniformly without replacement with
/// derive_rng(seed, "target-subset"), sorted; all of them when count is 0 or
/// at least the set size.
std::vector<NodeId> take_targets(std::span<const NodeId> targets, std::size_t count, std::uint64_t seed);

void write_report_json(std::ostream& os, const AttackReport& r);
AttackReport parse_report_json(const std::string& line);
std::vector<AttackReport> read_reports_jsonl(const std::filesystem::path& path);

/// rates[label][attacker] = successes / goals with that targeted label;
/// NaN where no goal exists. Attackers ordered by first appearance.
struct SuccessTable {
  std::vector<std::string> attackers;
  std::vector<std::vector<double>> rates;
  std::vector<std::vector<std::size_t>> goals;

  /// Mean over labels with at least one goal.
  double mean(std::size_t attacker) const;
  std::size_t column(const std::string& attacker) const;
};

SuccessTable success_rates(std::span<const AttackReport> reports, std::size_t num_labels);
/// Header `label,<attackers...>`, one row per label, then a `mean` row.
void write_success_csv(std::ostream& os, const SuccessTable& t);

/// cell (i, j): mean delta_prob over reports whose clean label is i and
/// targeted label is j, pooled over victims. Empty cells are NaN (logged).
std::vector<std::vector<double>> heatmap_matrix(std::span<const AttackReport> reports, std::size_t num_labels);
void write_matrix_csv(std::ostream& os, const std::vector<std::vector<double>>& m);

struct SweepResult {
  std::vector<std::size_t> budgets;
  /// means[b][y]: mean Ẑ[target, y] after greedy rollouts of length budgets[b]; NaN without goals.
  std::vector<std::vector<double>> means;
};

/// Greedy agent rollouts of each length in `budgets` (capped at F with a
/// warning); no retraining.
SweepResult budget_sweep(const Graph& g, const VictimOracle& victim, const Agent& agent, const LabelBank& bank,
                         std::span<const AttackGoal> goals, std::span<const std::size_t> budgets,
                         std::size_t workers = 1);
void write_sweep_csv(std::ostream& os, const SweepResult& s, std::size_t num_labels);

/// Deterministic CSV rendering of a double ("nan" for NaN).
std::string format_double(double v);

/// manifest.json: the config hash and the artifact list.
void write_manifest(const std::filesystem::path& out_dir, const std::string& config_hash,
                    const std::vector<std::string>& artifacts);

}  // namespace gnninject
