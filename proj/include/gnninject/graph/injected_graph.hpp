#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gnninject/core/sparse_matrix.hpp"
#include "gnninject/graph/graph.hpp"

namespace gnninject {

/// A base graph plus one injected node v_inj (id N) wired to a single target
/// by exactly one edge. Only the injected feature set changes; it never holds
/// more than `budget` features.
class InjectedGraph {
 public:
  InjectedGraph(const Graph& base, NodeId target, std::size_t budget);

  const Graph& base() const { return *base_; }
  NodeId target() const { return target_; }
  NodeId injected() const { return static_cast<NodeId>(base_->num_nodes()); }
  std::size_t num_nodes() const { return base_->num_nodes() + 1; }
  std::size_t budget() const { return budget_; }

  std::span<const FeatureId> features() const { return features_; }
  std::size_t num_injected_features() const { return features_.size(); }
  bool contains(FeatureId f) const;

  /// Inserts f; returns false when already present. Throws ContractViolation
  /// if f >= F or the budget is exhausted.
  bool add_feature(FeatureId f);

  /// Degree in the injected graph, excluding self-loops.
  std::size_t degree(NodeId u) const;

  /// Sorted neighbours in the injected graph.
  std::vector<NodeId> neighbors(NodeId u) const;

  /// (N+1) x (N+1) D^-1/2 (Â + I) D^-1/2.
  SparseMatrix normalized_adjacency() const;

  /// (N+1) x F binary features.
  SparseMatrix feature_matrix() const;

  /// Explicit (N+1)-node Graph; the injected node gets label 0.
  Graph materialize() const;

 private:
  const Graph* base_;
  NodeId target_;
  std::size_t budget_;
  std::vector<FeatureId> features_;
};

}  // namespace gnninject
