#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "gnninject/core/sparse_matrix.hpp"

namespace gnninject {

using NodeId = std::uint32_t;
using FeatureId = std::uint32_t;
using LabelId = std::uint32_t;

/// Undirected, unweighted attributed graph with binary bag-of-words features.
///
/// Adjacency is stored once per direction in CSR form with strictly increasing
/// column indices and no self-loops. Features are per-node sorted index lists.
/// Instances are immutable after construction.
class Graph {
 public:
  Graph() = default;

  /// Builds and validates a graph. Edges may be listed in one or both
  /// directions; duplicates are merged and self-loops dropped with a warning.
  /// Throws ValidationError on out-of-range node, feature or label ids.
  static Graph build(std::size_t num_nodes, std::size_t num_features, std::size_t num_labels,
                     std::span<const std::pair<NodeId, NodeId>> edges,
                     std::vector<std::vector<FeatureId>> features, std::vector<LabelId> labels);

  std::size_t num_nodes() const { return num_nodes_; }
  std::size_t num_features() const { return num_features_; }
  std::size_t num_labels() const { return num_labels_; }
  /// Number of undirected edges.
  std::size_t num_edges() const { return adj_indices_.size() / 2; }

  std::span<const NodeId> neighbors(NodeId u) const {
    return {adj_indices_.data() + adj_offsets_[u], adj_offsets_[u + 1] - adj_offsets_[u]};
  }
  std::size_t degree(NodeId u) const { return adj_offsets_[u + 1] - adj_offsets_[u]; }
  bool has_edge(NodeId u, NodeId v) const;

  std::span<const FeatureId> features(NodeId u) const {
    return {feat_indices_.data() + feat_offsets_[u], feat_offsets_[u + 1] - feat_offsets_[u]};
  }
  LabelId label(NodeId u) const { return labels_[u]; }
  std::span<const LabelId> labels() const { return labels_; }

  /// Count of self-loops removed at build time.
  std::size_t dropped_self_loops() const { return dropped_self_loops_; }

  /// Binary N x F feature matrix.
  SparseMatrix feature_matrix() const;

  /// Each undirected edge once, as (u, v) with u < v, in lexicographic order.
  std::vector<std::pair<NodeId, NodeId>> edge_list() const;

 private:
  std::size_t num_nodes_ = 0;
  std::size_t num_features_ = 0;
  std::size_t num_labels_ = 0;
  std::vector<std::size_t> adj_offsets_{0};
  std::vector<NodeId> adj_indices_;
  std::vector<std::size_t> feat_offsets_{0};
  std::vector<FeatureId> feat_indices_;
  std::vector<LabelId> labels_;
  std::size_t dropped_self_loops_ = 0;
};

/// Induced subgraph on `nodes` (any order); node ids are re-indexed densely in
/// increasing order of the original ids. `original_ids` maps back.
struct Subgraph {
  Graph graph;
  std::vector<NodeId> original_ids;
};

Subgraph induced_subgraph(const Graph& g, std::vector<NodeId> nodes);

/// Largest connected component. Ties go to the component containing the
/// smallest original node id.
Subgraph largest_connected_component(const Graph& g);

/// Component id for every node, numbered by smallest member id.
std::vector<std::uint32_t> connected_components(const Graph& g);

/// Maximum number of active features over all nodes (the L0 budget).
std::size_t max_feature_budget(const Graph& g);

/// D^-1/2 (A + I) D^-1/2 with degrees of A + I.
SparseMatrix normalized_adjacency(const Graph& g);

}  // namespace gnninject
