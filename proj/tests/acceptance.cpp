// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria. `acceptance 3 5` runs a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gnninject/agent/trainer.hpp"
#include "gnninject/core/log.hpp"
#include "gnninject/graph/io.hpp"
#include "gnninject/graph/splits.hpp"
#include "gnninject/harness/harness.hpp"
#include "gnninject/tensor/ops.hpp"
#include "support/env_oracle.hpp"
#include "support/gradcheck_suite.hpp"
#include "support/tempdir.hpp"

namespace fs = std::filesystem;

namespace gnninject {
namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int prec = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

std::string fmt_e(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

// ---- shared Cora state ---------------------------------------------------

constexpr std::uint64_t kSeed = 0;

struct Cora {
  Graph graph;
  SplitSpec split;
  std::optional<VictimModel> gcn;
  std::optional<VictimTrainStats> gcn_stats;
  double gcn_seconds = 0.0;
  std::optional<Agent> agent;
  std::vector<NodeId> agent_targets;
  double agent_seconds = 0.0;
  std::size_t agent_epochs = 0;
};

Cora& cora() {
  static Cora c = [] {
    Cora x;
    const fs::path dir = fs::path(GNNINJECT_SOURCE_DIR) / "data" / "cora";
    x.graph = load_dataset_dir(dir);
    x.split = load_splits(dir, x.graph.num_nodes());
    return x;
  }();
  return c;
}

const VictimModel& cora_gcn() {
  Cora& c = cora();
  if (!c.gcn) {
    const auto t0 = Clock::now();
    auto tv = train_victim(c.graph, c.split, GnnArchitecture::defaults(ArchKind::kGcn), kSeed);
    c.gcn_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    c.gcn_stats = tv.stats;
    c.gcn.emplace(std::move(tv.model));
    c.gcn->bind(c.graph);
  }
  return *c.gcn;
}

// ---- 1 --------------------------------------------------------------------

Outcome victim_accuracy() {
  Cora& c = cora();
  const VictimModel& gcn = cora_gcn();
  (void)gcn;
  struct Row {
    const char* name;
    ArchKind kind;
    double ref;
  };
  const Row rows[] = {{"gcn", ArchKind::kGcn, 83.71}, {"sgc", ArchKind::kSgc, 84.26}, {"surrogate", ArchKind::kSurrogate, 83.56}};
  bool ok = true;
  std::string detail;
  for (const auto& r : rows) {
    double acc = 0.0, secs = 0.0;
    if (r.kind == ArchKind::kGcn) {
      acc = 100.0 * c.gcn_stats->test_accuracy;
      secs = c.gcn_seconds;
    } else {
      const auto t0 = Clock::now();
      const auto tv = train_victim(c.graph, c.split, GnnArchitecture::defaults(r.kind), kSeed);
      secs = std::chrono::duration<double>(Clock::now() - t0).count();
      acc = 100.0 * tv.stats.test_accuracy;
    }
    const bool good = std::abs(acc - r.ref) <= 2.0 && secs < 120.0;
    ok = ok && good;
    detail += std::string(r.name) + " " + fmt(acc) + " (ref " + fmt(r.ref) + ", " + fmt(secs, 1) + " s)  ";
  }
  return {ok, detail};
}

// ---- 2 --------------------------------------------------------------------

Outcome gradient_engine() {
  const auto worst = testutil::run_gradcheck_suite(20240101, 100);
  double max_err = 0.0;
  std::string max_op;
  for (const auto& [op, e] : worst) {
    if (e > max_err) max_err = e, max_op = op;
  }
  return {max_err < 1e-5, std::to_string(worst.size()) + " checks x 100 instances, worst " + fmt_e(max_err) + " (" + max_op + ")"};
}

// ---- 3 --------------------------------------------------------------------

VictimModel random_model(ArchKind kind, const Graph& g, Rng& rng) {
  auto arch = GnnArchitecture::defaults(kind);
  arch.hidden = 2 + uniform_index(rng, 6);
  VictimModel m(arch, g.num_features(), g.num_labels(), rng());
  for (auto& [n, t] : m.params())
    for (auto& v : t.mutable_values()) v *= 3.0;
  m.freeze();
  m.bind(g);
  return m;
}

Graph random_graph(Rng& rng, std::size_t max_nodes) {
  SyntheticSpec s;
  s.labels = 2 + uniform_index(rng, 3);
  s.nodes = s.labels + uniform_index(rng, max_nodes - s.labels + 1);
  s.features = s.labels + uniform_index(rng, 8);
  s.p_in = 0.2 + 0.4 * uniform01(rng);
  s.p_out = 0.1 * uniform01(rng);
  s.max_words = std::min<std::size_t>(4, s.features);
  return make_synthetic_graph(s, rng());
}

Outcome environment_exactness() {
  Rng rng(303);
  double worst_q = 0.0, worst_e = 0.0;
  const ArchKind kinds[] = {ArchKind::kGcn, ArchKind::kSgc, ArchKind::kSurrogate};
  for (int i = 0; i < 200; ++i) {
    const Graph g = random_graph(rng, 12);
    const VictimModel m = random_model(kinds[i % 3], g, rng);
    ModelOracle o(m);
    const std::size_t budget = 1 + uniform_index(rng, g.num_features());
    AttackEnv env(g, o, budget);
    auto st = env.reset({NodeId(uniform_index(rng, g.num_nodes())), LabelId(uniform_index(rng, g.num_labels()))});
    const std::size_t k = uniform_index(rng, budget + 1);
    for (std::size_t s = 0; s < k; ++s) {
      FeatureId a;
      do a = FeatureId(uniform_index(rng, g.num_features()));
      while (!st.mask[a]);
      env.step(st, a);
    }
    const auto dense = oracle::forward_probs(m, st.injected.materialize());
    const double q = m.query_target_prob(st.injected, st.goal.label);
    worst_q = std::max(worst_q, std::abs(q - dense[st.goal.target][st.goal.label]));
    const auto bank = build_label_bank(g, o);
    const auto e = embed_state(st, bank);
    const auto want = oracle::embedding(st, bank);
    for (std::size_t j = 0; j < e.size(); ++j) worst_e = std::max(worst_e, std::abs(e[j] - want[j]));
  }
  return {worst_q <= 1e-10 && worst_e <= 1e-10,
          "200 instances, query max |err| " + fmt_e(worst_q) + ", embedding max |err| " + fmt_e(worst_e)};
}

// ---- 4 --------------------------------------------------------------------

Outcome reward_telescoping() {
  Rng rng(404);
  double worst = 0.0;
  const ArchKind kinds[] = {ArchKind::kGcn, ArchKind::kSgc, ArchKind::kSurrogate};
  for (int ep = 0; ep < 1000; ++ep) {
    const Graph g = random_graph(rng, 16);
    const VictimModel m = random_model(kinds[ep % 3], g, rng);
    ModelOracle o(m);
    AttackEnv env(g, o, 1 + uniform_index(rng, g.num_features()));
    auto st = env.reset({NodeId(uniform_index(rng, g.num_nodes())), LabelId(uniform_index(rng, g.num_labels()))});
    const double z0 = st.last_prob;
    double total = 0.0;
    bool done = false;
    while (!done) {
      FeatureId a;
      do a = FeatureId(uniform_index(rng, g.num_features()));
      while (!st.mask[a]);
      const auto r = env.step(st, a);
      total += r.reward;
      done = r.done;
    }
    const double zt = m.query_target_prob(st.injected, st.goal.label);
    worst = std::max(worst, std::abs(total - (std::log(zt) - std::log(z0))));
  }
  return {worst <= 1e-9, "1000 episodes, max |sum r - (ln Z_T - ln Z_0)| " + fmt_e(worst)};
}

// ---- 5 --------------------------------------------------------------------

Outcome ppo_machinery() {
  Rng rng(505);
  // GAE vs direct summation of the discounted TD residuals
  double worst_gae = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    RolloutBuffer b;
    b.reset(1 + uniform_index(rng, 4), 1 + uniform_index(rng, 64), 1, 1);
    for (std::size_t i = 0; i < b.size(); ++i) {
      b.rewards[i] = standard_normal(rng);
      b.values[i] = standard_normal(rng);
      b.dones[i] = uniform01(rng) < 0.1;
    }
    for (auto& v : b.bootstrap) v = standard_normal(rng);
    const double gamma = 0.99, lambda = 0.95;
    compute_gae(b, gamma, lambda);
    for (std::size_t e = 0; e < b.num_envs; ++e) {
      for (std::size_t t = 0; t < b.steps; ++t) {
        double sum = 0.0, w = 1.0;
        for (std::size_t s = t; s < b.steps; ++s) {
          const std::size_t i = b.index(s, e);
          const double next = b.dones[i] ? 0.0 : (s + 1 < b.steps ? b.values[b.index(s + 1, e)] : b.bootstrap[e]);
          sum += w * (b.rewards[i] + gamma * next - b.values[i]);
          w *= gamma * lambda;
          if (b.dones[i]) break;
        }
        worst_gae = std::max(worst_gae, oracle::rel_err(b.advantages[b.index(t, e)], sum));
      }
    }
  }

  // first update of a phase
  SyntheticSpec spec;
  spec.nodes = 30;
  spec.features = 12;
  spec.labels = 3;
  const Graph g = make_synthetic_graph(spec, 5);
  const VictimModel m = random_model(ArchKind::kGcn, g, rng);
  ModelOracle o(m);
  const LabelBank bank = build_label_bank(g, o);
  AttackEnv env(g, o, 4);
  std::vector<NodeId> targets(g.num_nodes());
  for (NodeId u = 0; u < targets.size(); ++u) targets[u] = u;
  AgentShape shape;
  shape.num_features = 12;
  shape.hidden = 64;
  PpoConfig cfg;
  cfg.parallel_envs = 16;
  cfg.steps_per_env = 32;
  cfg.batch = 128;
  Agent agent(shape, 7);
  Collector col = make_collector(env, targets, cfg.parallel_envs, 7);
  RolloutBuffer buf;
  double first_dev = 0.0;
  ad::Adam opt(agent.parameter_tensors(), ad::AdamConfig::linear_decay(cfg.lr, 30));
  Rng urng(8);
  for (int phase = 0; phase < 3; ++phase) {
    collect(agent, env, bank, targets, col, buf, cfg.steps_per_env);
    compute_gae(buf, cfg.gamma, cfg.lambda);
    first_dev = std::max(first_dev, ppo_update(agent, opt, buf, cfg, urng).first_ratio_deviation);
  }

  const bool clip_ok = clip_value(1.3, 0.9, 1.1) == 1.1 && clip_value(0.5, 0.9, 1.1) == 0.9 && clip_value(1.0, 0.9, 1.1) == 1.0;

  // masked actions in 10^6 draws
  const std::size_t f = 16;
  std::vector<double> logits(f);
  std::vector<std::uint8_t> mask(f);
  for (std::size_t i = 0; i < f; ++i) {
    logits[i] = 3.0 * standard_normal(rng);
    mask[i] = i % 3 != 0;
  }
  const auto lp = ad::masked_log_softmax_rows(ad::Tensor(1, f, logits), mask);
  std::size_t masked_hits = 0;
  for (int i = 0; i < 1000000; ++i) masked_hits += mask[sample_from_log_probs(lp.values(), rng)] == 0;

  const bool ok = worst_gae < 1e-12 && first_dev == 0.0 && clip_ok && masked_hits == 0;
  return {ok, "GAE worst rel err " + fmt_e(worst_gae) + "; first-update max |r-1| " + fmt_e(first_dev) +
                  "; clip table " + (clip_ok ? "exact" : "WRONG") + "; masked draws " + std::to_string(masked_hits) + "/1e6"};
}

// ---- 6 --------------------------------------------------------------------

struct Suite {
  std::vector<AttackGoal> goals;
  std::vector<AttackReport> reports;
  SuccessTable table;
};

AttackResources cora_resources(std::size_t budget) {
  AttackResources res;
  res.graph = &cora().graph;
  res.victim = &cora_gcn();
  res.victim_name = "gcn";
  res.predictions = cora_gcn().clean_predictions();
  res.budget = budget;
  res.seed = kSeed;
  return res;
}

Suite run_suite(const AttackResources& res, std::size_t n_targets, const std::vector<std::string>& attackers) {
  Suite s;
  s.goals = goal_grid(take_targets(cora().split.targets, n_targets, kSeed), cora().graph.num_labels());
  for (const auto& a : attackers) {
    auto r = run_attacks(res, parse_attacker(a), s.goals);
    s.reports.insert(s.reports.end(), r.begin(), r.end());
  }
  s.table = success_rates(s.reports, cora().graph.num_labels());
  return s;
}

void print_table(const SuccessTable& t) {
  std::cout << "    label";
  for (const auto& a : t.attackers) std::cout << "  " << a;
  std::cout << '\n';
  for (std::size_t y = 0; y < t.rates.size(); ++y) {
    std::cout << "    " << y;
    for (double v : t.rates[y]) std::cout << "  " << fmt(100 * v, 1);
    std::cout << '\n';
  }
  std::cout << "    mean";
  for (std::size_t c = 0; c < t.attackers.size(); ++c) std::cout << "  " << fmt(100 * t.mean(c), 2);
  std::cout << '\n';
}

Outcome baseline_reproduction() {
  const auto t0 = Clock::now();
  const std::size_t budget = max_feature_budget(cora().graph);
  const Suite s = run_suite(cora_resources(budget), 200, {"clean", "random", "mostattr", "greedy-victim"});
  print_table(s.table);
  // Published reference rates (%), Cora / GCN, y_t = 0..6
  const std::map<std::string, std::vector<double>> ref{
      {"clean", {9.3, 18.3, 27.8, 12.6, 8.6, 3.5, 19.9}},
      {"random", {13.6, 26.9, 37.4, 18.9, 15.3, 7.3, 27.3}},
      {"mostattr", {37.5, 50.3, 45.8, 45.0, 36.7, 25.9, 47.1}}};
  std::size_t misses = 0;
  std::string worst;
  double worst_gap = 0.0;
  for (const auto& [name, want] : ref) {
    const std::size_t c = s.table.column(name);
    for (std::size_t y = 0; y < want.size(); ++y) {
      const double gap = 100 * s.table.rates[y][c] - want[y];
      if (std::abs(gap) > 5.0) ++misses;
      if (std::abs(gap) > std::abs(worst_gap)) worst_gap = gap, worst = name + " y=" + std::to_string(y);
    }
  }
  const double greedy = 100 * s.table.mean(s.table.column("greedy-victim"));
  const bool greedy_ok = std::abs(greedy - 76.41) <= 5.0;
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  return {misses == 0 && greedy_ok && secs < 1800,
          std::to_string(misses) + "/21 per-label cells outside +-5 (worst " + worst + " " + fmt(worst_gap, 1) +
              "); greedy white-box mean " + fmt(greedy) + " (ref 76.41); " + fmt(secs, 1) + " s"};
}

// ---- 7 --------------------------------------------------------------------

constexpr std::size_t kAgentEpochs = 100;

const Agent& cora_agent() {
  Cora& c = cora();
  if (!c.agent) {
    const auto t0 = Clock::now();
    ModelOracle oracle(cora_gcn());
    const LabelBank bank = build_label_bank(c.graph, oracle);
    AttackEnv env(c.graph, oracle, max_feature_budget(c.graph));
    c.agent_targets = take_targets(c.split.targets, 100, kSeed);
    AgentShape shape;
    shape.num_features = c.graph.num_features();
    PpoConfig cfg;
    cfg.train_epochs = kAgentEpochs;
    // 100 phases at 2e-4 barely move the policy (eval 0.14 after 10); 1e-3 is the reduced-budget rate.
    cfg.lr = 1e-3;
    cfg.eval_every = 10;
    cfg.patience = kAgentEpochs;
    cfg.eval_goals = c.agent_targets.size() * c.graph.num_labels();
    std::ofstream log_out(fs::temp_directory_path() / "gnninject_acceptance_agent_log.jsonl");
    auto result = train_agent(env, bank, c.agent_targets, shape, cfg, kSeed, &log_out);
    c.agent_epochs = result.log.size();
    c.agent.emplace(std::move(result.best));
    c.agent_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  }
  return *c.agent;
}

Outcome ordering() {
  const Agent& agent = cora_agent();
  Cora& c = cora();
  const std::size_t budget = max_feature_budget(c.graph);
  auto res = cora_resources(budget);
  const LabelBank bank = build_label_bank(c.graph, res.predictions);
  res.agent = &agent;
  res.bank = &bank;
  const Suite s = run_suite(res, 100, {"random", "mostattr", "greedy-victim", "gsnia"});
  print_table(s.table);
  const double rnd = 100 * s.table.mean(s.table.column("random"));
  const double most = 100 * s.table.mean(s.table.column("mostattr"));
  const double greedy = 100 * s.table.mean(s.table.column("greedy-victim"));
  const double gsnia = 100 * s.table.mean(s.table.column("gsnia"));
  const bool ok = gsnia > most && most > rnd && gsnia >= greedy - 10.0 && c.agent_seconds < 7200;
  return {ok, "gsnia " + fmt(gsnia) + " > mostattr " + fmt(most) + " > random " + fmt(rnd) + "; greedy " + fmt(greedy) +
                  " (gap " + fmt(greedy - gsnia) + "); agent " + std::to_string(c.agent_epochs) + " epochs of S=4096 in " +
                  fmt(c.agent_seconds / 60, 1) + " min"};
}

// ---- 8 --------------------------------------------------------------------

Outcome budget_trend() {
  const auto t0 = Clock::now();
  const Agent& agent = cora_agent();
  Cora& c = cora();
  ModelOracle oracle(cora_gcn());
  const LabelBank bank = build_label_bank(c.graph, oracle);
  const std::size_t budget = max_feature_budget(c.graph);
  const auto goals = goal_grid(c.agent_targets, c.graph.num_labels());
  const std::vector<std::size_t> budgets{1, budget};
  const auto sweep = budget_sweep(c.graph, oracle, agent, bank, goals, budgets);
  bool ok = true;
  std::string detail;
  for (std::size_t y = 0; y < c.graph.num_labels(); ++y) {
    ok = ok && sweep.means[1][y] > sweep.means[0][y];
    detail += "y" + std::to_string(y) + " " + fmt(sweep.means[0][y], 3) + "->" + fmt(sweep.means[1][y], 3) + " ";
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  return {ok && secs < 600, "mean Z at budget 1 -> " + std::to_string(budget) + ": " + detail + "(" + fmt(secs, 1) + " s)"};
}

// ---- 9 --------------------------------------------------------------------

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    files[fs::relative(e.path(), dir).string()] = ss.str();
  }
  return files;
}

Outcome cli_determinism() {
  const auto t0 = Clock::now();
  testutil::TempDir tmp;
  const fs::path work = tmp.path() / "work";
  const std::string cli = GNNINJECT_CLI_PATH;
  const std::string data = (fs::path(GNNINJECT_SOURCE_DIR) / "data" / "cora").string();
  const std::string w = work.string();
  const std::vector<std::pair<std::string, std::string>> cmds{
      {"dataset prep", "dataset prep --format tsv --raw " + data + " --out " + w + "/data --seed 3"},
      {"victim train gcn", "victim train --data " + w + "/data --arch gcn --epochs 40 --out " + w + "/gcn.ckpt --seed 3"},
      {"victim train surrogate", "victim train --data " + w + "/data --arch surrogate --epochs 40 --out " + w + "/sur.ckpt --seed 3"},
      {"agent train", "agent train --data " + w + "/data --victim " + w + "/gcn.ckpt --out " + w +
                          "/agent --epochs 3 --parallel-envs 4 --steps-per-env 8 --batch 16 --update-steps 2 --hidden 32"
                          " --policy-layers 2 --value-layers 2 --eval-every 1 --targets 4 --seed 3"},
      {"attack run", "attack run --data " + w + "/data --victim " + w + "/gcn.ckpt --surrogate " + w + "/sur.ckpt --agent " +
                         w + "/agent/agent.ckpt --attacker clean,random,mostattr,oneshot-victim,greedy-victim,"
                         "oneshot-surrogate,greedy-surrogate,gsnia --targets 6 --out " + w + "/attack --seed 3"},
      {"report heatmap", "report heatmap --reports " + w + "/attack/reports.jsonl --attacker greedy-victim --out " + w +
                             "/heatmap.csv"},
      {"report sweep", "report sweep --data " + w + "/data --victim " + w + "/gcn.ckpt --agent " + w +
                           "/agent/agent.ckpt --budgets 0,1,14,56 --targets 4 --out " + w + "/sweep.csv --seed 3"},
  };
  std::vector<std::map<std::string, std::string>> runs;
  for (int rep = 0; rep < 2; ++rep) {
    fs::remove_all(work);
    fs::create_directories(work);
    for (const auto& [name, args] : cmds) {
      const std::string line = cli + " --log-level warn " + args + " > " + (tmp.path() / "stdout.txt").string() + " 2>&1";
      if (std::system(line.c_str()) != 0) return {false, "`" + name + "` exited nonzero"};
    }
    runs.push_back(snapshot(work));
  }
  std::size_t differ = 0;
  std::string first;
  for (const auto& [path, bytes] : runs[0]) {
    const auto it = runs[1].find(path);
    if (it == runs[1].end() || it->second != bytes) {
      ++differ;
      if (first.empty()) first = path;
    }
  }
  if (runs[0].size() != runs[1].size()) ++differ;
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  return {differ == 0 && secs < 300, std::to_string(cmds.size()) + " commands, " + std::to_string(runs[0].size()) +
                                         " output files, " + std::to_string(differ) + " differing" +
                                         (first.empty() ? "" : " (first: " + first + ")") + "; " + fmt(secs, 1) + " s"};
}

}  // namespace
}  // namespace gnninject

int main(int argc, char** argv) {
  using namespace gnninject;
  log::set_level(log::Level::kWarn);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"victim accuracy", victim_accuracy},
      {"gradient engine", gradient_engine},
      {"environment exactness", environment_exactness},
      {"reward telescoping", reward_telescoping},
      {"PPO machinery", ppo_machinery},
      {"baseline reproduction", baseline_reproduction},
      {"ordering", ordering},
      {"budget trend", budget_trend},
      {"determinism", cli_determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[i].first << "): " << o.detail
              << std::endl;
  }
  return failed;
}
