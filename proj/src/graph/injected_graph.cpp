#include "gnninject/graph/injected_graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gnninject/core/errors.hpp"

namespace gnninject {

InjectedGraph::InjectedGraph(const Graph& base, NodeId target, std::size_t budget)
    : base_(&base), target_(target), budget_(budget) {
  if (target >= base.num_nodes()) {
    throw ValidationError("target " + std::to_string(target) + " >= N=" + std::to_string(base.num_nodes()));
  }
}

bool InjectedGraph::contains(FeatureId f) const {
  return std::binary_search(features_.begin(), features_.end(), f);
}

bool InjectedGraph::add_feature(FeatureId f) {
  if (f >= base_->num_features()) {
    throw ContractViolation("feature " + std::to_string(f) + " >= F=" + std::to_string(base_->num_features()));
  }
  const auto it = std::lower_bound(features_.begin(), features_.end(), f);
  if (it != features_.end() && *it == f) return false;
  if (features_.size() >= budget_) {
    throw ContractViolation("feature budget " + std::to_string(budget_) + " exhausted");
  }
  features_.insert(it, f);
  return true;
}

std::size_t InjectedGraph::degree(NodeId u) const {
  if (u == injected()) return 1;
  return base_->degree(u) + (u == target_ ? 1 : 0);
}

std::vector<NodeId> InjectedGraph::neighbors(NodeId u) const {
  if (u == injected()) return {target_};
  const auto nb = base_->neighbors(u);
  std::vector<NodeId> out(nb.begin(), nb.end());
  if (u == target_) out.push_back(injected());
  return out;
}

SparseMatrix InjectedGraph::normalized_adjacency() const {
  const std::size_t n = num_nodes();
  const NodeId inj = injected();
  std::vector<double> inv_sqrt(n);
  for (NodeId u = 0; u < n; ++u) inv_sqrt[u] = 1.0 / std::sqrt(static_cast<double>(degree(u) + 1));

  SparseMatrix m;
  m.rows = m.cols = n;
  m.offsets.assign(n + 1, 0);
  m.indices.reserve(2 * base_->num_edges() + n + 2);
  m.values.reserve(m.indices.capacity());
  const auto push = [&](NodeId u, NodeId v) {
    m.indices.push_back(v);
    m.values.push_back(inv_sqrt[u] * inv_sqrt[v]);
  };
  for (NodeId u = 0; u < base_->num_nodes(); ++u) {
    bool self_done = false;
    for (NodeId v : base_->neighbors(u)) {
      if (!self_done && v > u) {
        push(u, u);
        self_done = true;
      }
      push(u, v);
    }
    if (!self_done) push(u, u);
    if (u == target_) push(u, inj);
    m.offsets[u + 1] = m.indices.size();
  }
  push(inj, target_);
  push(inj, inj);
  m.offsets[n] = m.indices.size();
  return m;
}

SparseMatrix InjectedGraph::feature_matrix() const {
  SparseMatrix m = base_->feature_matrix();
  m.rows += 1;
  m.indices.insert(m.indices.end(), features_.begin(), features_.end());
  m.values.insert(m.values.end(), features_.size(), 1.0);
  m.offsets.push_back(m.indices.size());
  return m;
}

Graph InjectedGraph::materialize() const {
  auto edges = base_->edge_list();
  edges.emplace_back(target_, injected());
  std::vector<std::vector<FeatureId>> feats(num_nodes());
  std::vector<LabelId> labels(num_nodes(), 0);
  for (NodeId u = 0; u < base_->num_nodes(); ++u) {
    const auto f = base_->features(u);
    feats[u].assign(f.begin(), f.end());
    labels[u] = base_->label(u);
  }
  feats.back() = features_;
  return Graph::build(num_nodes(), base_->num_features(), base_->num_labels(), edges,
                      std::move(feats), std::move(labels));
}

}  // namespace gnninject
