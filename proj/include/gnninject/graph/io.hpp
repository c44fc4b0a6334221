#pragma once

#include <filesystem>

#include "gnninject/graph/graph.hpp"

namespace gnninject {

// Dataset directory layout (all files tab-separated, 0-based ids):
//   meta.tsv      one line: N  F  Y
//   edges.tsv     u  v         (each undirected edge once or twice)
//   features.tsv  node  feature (coordinates of the ones)
//   labels.tsv    node  label
struct DatasetPaths {
  std::filesystem::path meta;
  std::filesystem::path edges;
  std::filesystem::path features;
  std::filesystem::path labels;

  static DatasetPaths in_dir(const std::filesystem::path& dir);
};

Graph load_dataset(const DatasetPaths& paths);
Graph load_dataset_dir(const std::filesystem::path& dir);

/// Canonical form: edges once with u < v sorted, features and labels sorted by node.
void write_dataset(const Graph& g, const std::filesystem::path& dir);

/// LINQS citation dump: `<id> <0/1 x F> <class>` content lines plus
/// `<cited> <citing>` cites lines. Node ids follow content-file order, label
/// ids follow sorted class names. Citations to unknown papers are skipped.
Graph import_linqs(const std::filesystem::path& content, const std::filesystem::path& cites);

}  // namespace gnninject
