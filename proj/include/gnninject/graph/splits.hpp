#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "gnninject/graph/graph.hpp"

namespace gnninject {

/// Disjoint train/val/test partition plus the attacked target set.
/// All id lists are sorted ascending.
struct SplitSpec {
  std::vector<NodeId> train;
  std::vector<NodeId> val;
  std::vector<NodeId> test;
  std::vector<NodeId> targets;
  std::uint64_t seed = 0;
};

inline constexpr std::size_t kMaxTargets = 1000;

/// floor(0.1 N) train, floor(0.1 N) val, remainder test; min(1000, |test|)
/// targets drawn uniformly without replacement from test. Requires N >= 10.
SplitSpec make_splits(const Graph& g, std::uint64_t seed, std::size_t max_targets = kMaxTargets);

/// Throws ValidationError unless train/val/test partition [0, N) and targets ⊆ test.
void validate_splits(const SplitSpec& s, std::size_t num_nodes);

// splits.tsv: `node \t {train|val|test}` for every node; targets.tsv: one id per line.
void write_splits(const SplitSpec& s, const std::filesystem::path& dir);
SplitSpec load_splits(const std::filesystem::path& dir, std::size_t num_nodes);

}  // namespace gnninject
