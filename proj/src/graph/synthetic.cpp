#include "gnninject/graph/synthetic.hpp"

#include <algorithm>

#include "gnninject/core/errors.hpp"
#include "gnninject/core/rng.hpp"

namespace gnninject {

Graph make_synthetic_graph(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.labels == 0 || spec.features < spec.labels || spec.nodes < spec.labels) {
    throw ValidationError("synthetic spec needs nodes >= labels, features >= labels > 0");
  }
  if (spec.min_words == 0 || spec.min_words > spec.max_words || spec.max_words > spec.features) {
    throw ValidationError("synthetic spec needs 1 <= min_words <= max_words <= features");
  }
  Rng rng(seed);
  const std::size_t n = spec.nodes;
  std::vector<LabelId> labels(n);
  for (std::size_t u = 0; u < n; ++u) labels[u] = static_cast<LabelId>(u % spec.labels);
  shuffle(labels.begin(), labels.end(), rng);

  std::vector<std::pair<NodeId, NodeId>> edges;
  for (NodeId u = 0; u < n; ++u) {
    for (NodeId v = u + 1; v < n; ++v) {
      const double p = labels[u] == labels[v] ? spec.p_in : spec.p_out;
      if (uniform01(rng) < p) edges.emplace_back(u, v);
    }
  }

  // Chain components together so the graph is connected.
  std::vector<NodeId> parent(n);
  for (NodeId u = 0; u < n; ++u) parent[u] = u;
  const auto find = [&](NodeId x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& [u, v] : edges) parent[find(u)] = find(v);
  for (NodeId u = 1; u < n; ++u) {
    if (find(u) != find(0)) {
      // Prefer a same-class partner already in the main component.
      NodeId partner = 0;
      for (NodeId v = 0; v < u; ++v) {
        if (find(v) == find(0) && labels[v] == labels[u]) {
          partner = v;
          break;
        }
      }
      edges.emplace_back(partner, u);
      parent[find(u)] = find(partner);
    }
  }

  const std::size_t block = spec.features / spec.labels;
  std::vector<std::vector<FeatureId>> feats(n);
  for (NodeId u = 0; u < n; ++u) {
    const std::size_t words = spec.min_words + uniform_index(rng, spec.max_words - spec.min_words + 1);
    auto& row = feats[u];
    std::size_t guard = 0;
    while (row.size() < words && guard++ < 64 * spec.features) {
      FeatureId f = 0;
      if (uniform01(rng) < spec.feature_affinity) {
        f = static_cast<FeatureId>(labels[u] * block + uniform_index(rng, block));
      } else {
        f = static_cast<FeatureId>(uniform_index(rng, spec.features));
      }
      if (std::find(row.begin(), row.end(), f) == row.end()) row.push_back(f);
    }
  }
  return Graph::build(n, spec.features, spec.labels, edges, std::move(feats), std::move(labels));
}

}  // namespace gnninject
