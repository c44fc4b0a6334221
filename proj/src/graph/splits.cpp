#include "gnninject/graph/splits.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <string>

#include "gnninject/core/errors.hpp"
#include "gnninject/core/rng.hpp"

namespace gnninject {

SplitSpec make_splits(const Graph& g, std::uint64_t seed, std::size_t max_targets) {
  const std::size_t n = g.num_nodes();
  if (n < 10) throw ValidationError("make_splits needs at least 10 nodes, got " + std::to_string(n));

  Rng rng(seed);
  std::vector<NodeId> perm(n);
  std::iota(perm.begin(), perm.end(), NodeId{0});
  shuffle(perm.begin(), perm.end(), rng);

  const std::size_t n_train = n / 10;
  const std::size_t n_val = n / 10;
  SplitSpec s;
  s.seed = seed;
  s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
               perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), perm.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());

  // Partial Fisher-Yates over the sorted test list.
  std::vector<NodeId> pool = s.test;
  const std::size_t k = std::min(max_targets, pool.size());
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + uniform_index(rng, pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  s.targets.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(s.targets.begin(), s.targets.end());
  return s;
}

void validate_splits(const SplitSpec& s, std::size_t num_nodes) {
  std::vector<int> owner(num_nodes, -1);
  const auto mark = [&](const std::vector<NodeId>& ids, int tag, const char* name) {
    for (NodeId u : ids) {
      if (u >= num_nodes) throw ValidationError(std::string(name) + " id " + std::to_string(u) + " out of range");
      if (owner[u] != -1) throw ValidationError("node " + std::to_string(u) + " appears in more than one split");
      owner[u] = tag;
    }
  };
  mark(s.train, 0, "train");
  mark(s.val, 1, "val");
  mark(s.test, 2, "test");
  for (std::size_t u = 0; u < num_nodes; ++u) {
    if (owner[u] == -1) throw ValidationError("node " + std::to_string(u) + " is in no split");
  }
  for (NodeId t : s.targets) {
    if (t >= num_nodes || owner[t] != 2) throw ValidationError("target " + std::to_string(t) + " is not a test node");
  }
}

void write_splits(const SplitSpec& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::size_t n = s.train.size() + s.val.size() + s.test.size();
  std::vector<const char*> tag(n, nullptr);
  for (NodeId u : s.train) tag.at(u) = "train";
  for (NodeId u : s.val) tag.at(u) = "val";
  for (NodeId u : s.test) tag.at(u) = "test";
  std::ofstream out(dir / "splits.tsv", std::ios::binary);
  if (!out) throw Error("cannot write " + (dir / "splits.tsv").string());
  for (std::size_t u = 0; u < n; ++u) out << u << '\t' << tag[u] << '\n';
  std::ofstream tout(dir / "targets.tsv", std::ios::binary);
  if (!tout) throw Error("cannot write " + (dir / "targets.tsv").string());
  for (NodeId t : s.targets) tout << t << '\n';
}

SplitSpec load_splits(const std::filesystem::path& dir, std::size_t num_nodes) {
  SplitSpec s;
  const auto path = dir / "splits.tsv";
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(path.string(), lineno, "expected 'node<TAB>split'");
    NodeId u = 0;
    auto [p, ec] = std::from_chars(line.data(), line.data() + tab, u);
    if (ec != std::errc() || p != line.data() + tab) throw ParseError(path.string(), lineno, "bad node id");
    const auto which = line.substr(tab + 1);
    if (which == "train") {
      s.train.push_back(u);
    } else if (which == "val") {
      s.val.push_back(u);
    } else if (which == "test") {
      s.test.push_back(u);
    } else {
      throw ParseError(path.string(), lineno, "unknown split '" + which + "'");
    }
  }
  const auto tpath = dir / "targets.tsv";
  std::ifstream tin(tpath);
  if (!tin) throw Error("cannot open " + tpath.string());
  lineno = 0;
  while (std::getline(tin, line)) {
    ++lineno;
    if (line.empty()) continue;
    NodeId u = 0;
    auto [p, ec] = std::from_chars(line.data(), line.data() + line.size(), u);
    if (ec != std::errc() || p != line.data() + line.size()) throw ParseError(tpath.string(), lineno, "bad node id");
    s.targets.push_back(u);
  }
  for (auto* v : {&s.train, &s.val, &s.test, &s.targets}) std::sort(v->begin(), v->end());
  validate_splits(s, num_nodes);
  return s;
}

}  // namespace gnninject
