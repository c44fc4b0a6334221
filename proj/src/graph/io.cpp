#include "gnninject/graph/io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>

#include "gnninject/core/errors.hpp"
#include "gnninject/core/log.hpp"

namespace gnninject {
namespace {

std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw Error("cannot open " + p.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  return out;
}

// Splits a tab/space separated line into exactly `n` unsigned integers.
template <std::size_t n>
std::array<std::uint64_t, n> parse_fields(const std::string& line, const std::string& file,
                                          std::size_t lineno) {
  std::array<std::uint64_t, n> out{};
  const char* p = line.data();
  const char* end = line.data() + line.size();
  for (std::size_t i = 0; i < n; ++i) {
    while (p < end && (*p == ' ' || *p == '\t')) ++p;
    auto [next, ec] = std::from_chars(p, end, out[i]);
    if (ec != std::errc() || next == p) {
      throw ParseError(file, lineno, "expected " + std::to_string(n) + " non-negative integers, got '" + line + "'");
    }
    p = next;
  }
  while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
  if (p != end) throw ParseError(file, lineno, "trailing characters in '" + line + "'");
  return out;
}

template <std::size_t n, typename Fn>
void for_each_record(const std::filesystem::path& path, Fn&& fn) {
  auto in = open_in(path);
  std::string line;
  std::size_t lineno = 0;
  const auto name = path.string();
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r" || line[0] == '#') continue;
    fn(parse_fields<n>(line, name, lineno), lineno);
  }
}

}  // namespace

DatasetPaths DatasetPaths::in_dir(const std::filesystem::path& dir) {
  return {dir / "meta.tsv", dir / "edges.tsv", dir / "features.tsv", dir / "labels.tsv"};
}

Graph load_dataset(const DatasetPaths& paths) {
  std::uint64_t n = 0, f = 0, y = 0;
  bool have_meta = false;
  for_each_record<3>(paths.meta, [&](const auto& rec, std::size_t lineno) {
    if (have_meta) throw ParseError(paths.meta.string(), lineno, "meta.tsv must contain a single line");
    n = rec[0];
    f = rec[1];
    y = rec[2];
    have_meta = true;
  });
  if (!have_meta) throw ParseError(paths.meta.string(), 1, "missing N F Y line");

  const auto check_node = [&](std::uint64_t id, const std::filesystem::path& p, std::size_t lineno) {
    if (id >= n) {
      throw ValidationError(p.string() + ":" + std::to_string(lineno) + ": node " + std::to_string(id) +
                            " >= N=" + std::to_string(n));
    }
  };

  std::vector<std::pair<NodeId, NodeId>> edges;
  for_each_record<2>(paths.edges, [&](const auto& rec, std::size_t lineno) {
    check_node(rec[0], paths.edges, lineno);
    check_node(rec[1], paths.edges, lineno);
    edges.emplace_back(static_cast<NodeId>(rec[0]), static_cast<NodeId>(rec[1]));
  });

  std::vector<std::vector<FeatureId>> feats(n);
  for_each_record<2>(paths.features, [&](const auto& rec, std::size_t lineno) {
    check_node(rec[0], paths.features, lineno);
    if (rec[1] >= f) {
      throw ValidationError(paths.features.string() + ":" + std::to_string(lineno) + ": feature " +
                            std::to_string(rec[1]) + " >= F=" + std::to_string(f));
    }
    feats[rec[0]].push_back(static_cast<FeatureId>(rec[1]));
  });

  std::vector<LabelId> labels(n, 0);
  std::vector<bool> seen(n, false);
  for_each_record<2>(paths.labels, [&](const auto& rec, std::size_t lineno) {
    check_node(rec[0], paths.labels, lineno);
    if (rec[1] >= y) {
      throw ValidationError(paths.labels.string() + ":" + std::to_string(lineno) + ": label " +
                            std::to_string(rec[1]) + " >= Y=" + std::to_string(y));
    }
    labels[rec[0]] = static_cast<LabelId>(rec[1]);
    seen[rec[0]] = true;
  });
  const auto missing = static_cast<std::size_t>(std::count(seen.begin(), seen.end(), false));
  if (missing > 0) throw ValidationError(paths.labels.string() + ": " + std::to_string(missing) + " node(s) without a label");

  return Graph::build(n, f, y, edges, std::move(feats), std::move(labels));
}

Graph load_dataset_dir(const std::filesystem::path& dir) { return load_dataset(DatasetPaths::in_dir(dir)); }

void write_dataset(const Graph& g, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto paths = DatasetPaths::in_dir(dir);
  {
    auto out = open_out(paths.meta);
    out << g.num_nodes() << '\t' << g.num_features() << '\t' << g.num_labels() << '\n';
  }
  {
    auto out = open_out(paths.edges);
    for (const auto& [u, v] : g.edge_list()) out << u << '\t' << v << '\n';
  }
  {
    auto out = open_out(paths.features);
    for (NodeId u = 0; u < g.num_nodes(); ++u) {
      for (FeatureId f : g.features(u)) out << u << '\t' << f << '\n';
    }
  }
  {
    auto out = open_out(paths.labels);
    for (NodeId u = 0; u < g.num_nodes(); ++u) out << u << '\t' << g.label(u) << '\n';
  }
}

Graph import_linqs(const std::filesystem::path& content, const std::filesystem::path& cites) {
  struct Row {
    std::string id;
    std::vector<FeatureId> feats;
    std::string cls;
  };
  std::vector<Row> rows;
  std::size_t num_features = 0;
  {
    auto in = open_in(content);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      std::istringstream ss(line);
      std::vector<std::string> tok;
      for (std::string t; ss >> t;) tok.push_back(std::move(t));
      if (tok.size() < 3) throw ParseError(content.string(), lineno, "expected id, attributes and class");
      const std::size_t f = tok.size() - 2;
      if (num_features == 0) num_features = f;
      if (f != num_features) {
        throw ParseError(content.string(), lineno,
                         "expected " + std::to_string(num_features) + " attributes, got " + std::to_string(f));
      }
      Row r{tok.front(), {}, tok.back()};
      for (std::size_t i = 0; i < f; ++i) {
        const auto& v = tok[i + 1];
        if (v == "1") {
          r.feats.push_back(static_cast<FeatureId>(i));
        } else if (v != "0") {
          throw ParseError(content.string(), lineno, "attribute '" + v + "' is not 0/1");
        }
      }
      rows.push_back(std::move(r));
    }
  }

  std::map<std::string, LabelId> classes;
  for (const auto& r : rows) classes.emplace(r.cls, 0);
  LabelId next = 0;
  for (auto& [name, id] : classes) id = next++;

  std::unordered_map<std::string, NodeId> index;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!index.emplace(rows[i].id, static_cast<NodeId>(i)).second) {
      throw ValidationError("duplicate paper id " + rows[i].id);
    }
  }

  std::vector<std::pair<NodeId, NodeId>> edges;
  std::size_t skipped = 0;
  {
    auto in = open_in(cites);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      std::istringstream ss(line);
      std::string a, b, extra;
      if (!(ss >> a >> b) || (ss >> extra)) throw ParseError(cites.string(), lineno, "expected two paper ids");
      const auto ia = index.find(a);
      const auto ib = index.find(b);
      if (ia == index.end() || ib == index.end()) {
        ++skipped;
        continue;
      }
      edges.emplace_back(ia->second, ib->second);
    }
  }
  if (skipped > 0) log::warn("skipped " + std::to_string(skipped) + " citation(s) to unknown papers");

  std::vector<std::vector<FeatureId>> feats;
  std::vector<LabelId> labels;
  feats.reserve(rows.size());
  for (auto& r : rows) {
    feats.push_back(std::move(r.feats));
    labels.push_back(classes.at(r.cls));
  }
  return Graph::build(rows.size(), num_features, classes.size(), edges, std::move(feats), std::move(labels));
}

}  // namespace gnninject
