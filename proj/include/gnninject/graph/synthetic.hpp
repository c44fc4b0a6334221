#pragma once

#include <cstdint>

#include "gnninject/graph/graph.hpp"

namespace gnninject {

/// Planted-partition citation-like graph for tests and toy experiments.
/// Each class owns a block of `features / labels` preferred words; a node
/// draws each of its words from its class block with probability
/// `feature_affinity`, otherwise uniformly.
struct SyntheticSpec {
  std::size_t nodes = 30;
  std::size_t features = 12;
  std::size_t labels = 2;
  double p_in = 0.3;
  double p_out = 0.02;
  std::size_t min_words = 1;
  std::size_t max_words = 4;
  double feature_affinity = 0.8;
};

/// Deterministic for a given seed. Isolated nodes are chained to a random
/// neighbour so the result is connected.
Graph make_synthetic_graph(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace gnninject
