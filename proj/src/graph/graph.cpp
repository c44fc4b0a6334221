#include "gnninject/graph/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gnninject/core/errors.hpp"
#include "gnninject/core/log.hpp"

namespace gnninject {

Graph Graph::build(std::size_t num_nodes, std::size_t num_features, std::size_t num_labels,
                   std::span<const std::pair<NodeId, NodeId>> edges,
                   std::vector<std::vector<FeatureId>> features, std::vector<LabelId> labels) {
  if (features.size() != num_nodes) {
    throw ValidationError("feature rows (" + std::to_string(features.size()) +
                          ") != num_nodes (" + std::to_string(num_nodes) + ")");
  }
  if (labels.size() != num_nodes) {
    throw ValidationError("labels (" + std::to_string(labels.size()) + ") != num_nodes (" +
                          std::to_string(num_nodes) + ")");
  }

  Graph g;
  g.num_nodes_ = num_nodes;
  g.num_features_ = num_features;
  g.num_labels_ = num_labels;

  std::vector<std::pair<NodeId, NodeId>> directed;
  directed.reserve(edges.size() * 2);
  for (const auto& [u, v] : edges) {
    if (u >= num_nodes || v >= num_nodes) {
      throw ValidationError("edge (" + std::to_string(u) + ", " + std::to_string(v) +
                            ") references a node >= " + std::to_string(num_nodes));
    }
    if (u == v) {
      ++g.dropped_self_loops_;
      continue;
    }
    directed.emplace_back(u, v);
    directed.emplace_back(v, u);
  }
  if (g.dropped_self_loops_ > 0) {
    log::warn("dropped " + std::to_string(g.dropped_self_loops_) + " self-loop(s)");
  }
  std::sort(directed.begin(), directed.end());
  directed.erase(std::unique(directed.begin(), directed.end()), directed.end());

  g.adj_offsets_.assign(num_nodes + 1, 0);
  g.adj_indices_.reserve(directed.size());
  for (const auto& [u, v] : directed) {
    ++g.adj_offsets_[u + 1];
    g.adj_indices_.push_back(v);
  }
  std::partial_sum(g.adj_offsets_.begin(), g.adj_offsets_.end(), g.adj_offsets_.begin());

  g.feat_offsets_.assign(num_nodes + 1, 0);
  for (std::size_t u = 0; u < num_nodes; ++u) {
    auto& row = features[u];
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    if (!row.empty() && row.back() >= num_features) {
      throw ValidationError("node " + std::to_string(u) + " has feature " +
                            std::to_string(row.back()) + " >= F=" + std::to_string(num_features));
    }
    g.feat_offsets_[u + 1] = g.feat_offsets_[u] + row.size();
    g.feat_indices_.insert(g.feat_indices_.end(), row.begin(), row.end());
  }

  for (std::size_t u = 0; u < num_nodes; ++u) {
    if (labels[u] >= num_labels) {
      throw ValidationError("node " + std::to_string(u) + " has label " +
                            std::to_string(labels[u]) + " >= Y=" + std::to_string(num_labels));
    }
  }
  g.labels_ = std::move(labels);
  return g;
}

bool Graph::has_edge(NodeId u, NodeId v) const {
  const auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

SparseMatrix Graph::feature_matrix() const {
  SparseMatrix m;
  m.rows = num_nodes_;
  m.cols = num_features_;
  m.offsets = feat_offsets_;
  m.indices.assign(feat_indices_.begin(), feat_indices_.end());
  m.values.assign(feat_indices_.size(), 1.0);
  return m;
}

std::vector<std::pair<NodeId, NodeId>> Graph::edge_list() const {
  std::vector<std::pair<NodeId, NodeId>> out;
  out.reserve(num_edges());
  for (NodeId u = 0; u < num_nodes_; ++u) {
    for (NodeId v : neighbors(u)) {
      if (u < v) out.emplace_back(u, v);
    }
  }
  return out;
}

Subgraph induced_subgraph(const Graph& g, std::vector<NodeId> nodes) {
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  constexpr NodeId kAbsent = ~NodeId{0};
  std::vector<NodeId> remap(g.num_nodes(), kAbsent);
  for (std::size_t i = 0; i < nodes.size(); ++i) remap[nodes[i]] = static_cast<NodeId>(i);

  std::vector<std::pair<NodeId, NodeId>> edges;
  std::vector<std::vector<FeatureId>> feats(nodes.size());
  std::vector<LabelId> labels(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const NodeId u = nodes[i];
    for (NodeId v : g.neighbors(u)) {
      if (u < v && remap[v] != kAbsent) edges.emplace_back(static_cast<NodeId>(i), remap[v]);
    }
    const auto f = g.features(u);
    feats[i].assign(f.begin(), f.end());
    labels[i] = g.label(u);
  }
  return Subgraph{Graph::build(nodes.size(), g.num_features(), g.num_labels(), edges,
                               std::move(feats), std::move(labels)),
                  std::move(nodes)};
}

std::vector<std::uint32_t> connected_components(const Graph& g) {
  constexpr std::uint32_t kUnseen = ~std::uint32_t{0};
  std::vector<std::uint32_t> comp(g.num_nodes(), kUnseen);
  std::vector<NodeId> stack;
  std::uint32_t next = 0;
  for (NodeId s = 0; s < g.num_nodes(); ++s) {
    if (comp[s] != kUnseen) continue;
    comp[s] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      const NodeId u = stack.back();
      stack.pop_back();
      for (NodeId v : g.neighbors(u)) {
        if (comp[v] == kUnseen) {
          comp[v] = next;
          stack.push_back(v);
        }
      }
    }
    ++next;
  }
  return comp;
}

Subgraph largest_connected_component(const Graph& g) {
  if (g.num_nodes() == 0) return Subgraph{g, {}};
  const auto comp = connected_components(g);
  const auto num_comp = *std::max_element(comp.begin(), comp.end()) + 1;
  std::vector<std::size_t> sizes(num_comp, 0);
  for (auto c : comp) ++sizes[c];
  // Components are numbered by their smallest member, so the first maximum
  // is the tie-break winner.
  const auto best = static_cast<std::uint32_t>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  std::vector<NodeId> nodes;
  nodes.reserve(sizes[best]);
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    if (comp[u] == best) nodes.push_back(u);
  }
  return induced_subgraph(g, std::move(nodes));
}

std::size_t max_feature_budget(const Graph& g) {
  std::size_t best = 0;
  for (NodeId u = 0; u < g.num_nodes(); ++u) best = std::max(best, g.features(u).size());
  return best;
}

SparseMatrix normalized_adjacency(const Graph& g) {
  const std::size_t n = g.num_nodes();
  std::vector<double> inv_sqrt(n);
  for (NodeId u = 0; u < n; ++u) inv_sqrt[u] = 1.0 / std::sqrt(static_cast<double>(g.degree(u) + 1));

  SparseMatrix m;
  m.rows = m.cols = n;
  m.offsets.assign(n + 1, 0);
  m.indices.reserve(2 * g.num_edges() + n);
  m.values.reserve(2 * g.num_edges() + n);
  for (NodeId u = 0; u < n; ++u) {
    bool self_done = false;
    for (NodeId v : g.neighbors(u)) {
      if (!self_done && v > u) {
        m.indices.push_back(u);
        m.values.push_back(inv_sqrt[u] * inv_sqrt[u]);
        self_done = true;
      }
      m.indices.push_back(v);
      m.values.push_back(inv_sqrt[u] * inv_sqrt[v]);
    }
    if (!self_done) {
      m.indices.push_back(u);
      m.values.push_back(inv_sqrt[u] * inv_sqrt[u]);
    }
    m.offsets[u + 1] = m.indices.size();
  }
  return m;
}

}  // namespace gnninject
