#include "gnninject/harness/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "gnninject/agent/trainer.hpp"
#include "gnninject/baselines/baselines.hpp"
#include "gnninject/core/errors.hpp"
#include "gnninject/core/log.hpp"
#include "gnninject/models/oracle.hpp"
#include "json.hpp"

namespace gnninject {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

std::string AttackerSpec::name() const {
  switch (kind) {
    case AttackerKind::kClean: return "clean";
    case AttackerKind::kRandom: return "random";
    case AttackerKind::kMostAttr: return "mostattr";
    case AttackerKind::kGsnia: return "gsnia";
    case AttackerKind::kOneShot:
    case AttackerKind::kGreedy: {
      const std::string base = kind == AttackerKind::kOneShot ? "oneshot" : "greedy";
      return base + (grad == GradSource::kSurrogate ? "-surrogate" : "-victim");
    }
  }
  return "?";
}

AttackerSpec parse_attacker(const std::string& name, const std::string& grad_source) {
  auto grad_of = [](const std::string& s) {
    if (s == "victim" || s == "whitebox") return GradSource::kVictim;
    if (s == "surrogate" || s == "blackbox") return GradSource::kSurrogate;
    throw UsageError("unknown gradient source '" + s + "' (expected victim or surrogate)");
  };
  if (name == "clean") return {AttackerKind::kClean, GradSource::kNone};
  if (name == "random") return {AttackerKind::kRandom, GradSource::kNone};
  if (name == "mostattr") return {AttackerKind::kMostAttr, GradSource::kNone};
  if (name == "gsnia") return {AttackerKind::kGsnia, GradSource::kNone};
  for (const auto& [base, kind] : {std::pair{std::string("oneshot"), AttackerKind::kOneShot},
                                   std::pair{std::string("greedy"), AttackerKind::kGreedy}}) {
    if (name == base) return {kind, grad_of(grad_source)};
    if (name.rfind(base + "-", 0) == 0) return {kind, grad_of(name.substr(base.size() + 1))};
  }
  throw UsageError("unknown attacker '" + name + "' (expected clean, random, mostattr, oneshot, greedy or gsnia)");
}

AttackReport run_attack(const AttackResources& res, const AttackerSpec& spec, const AttackGoal& goal,
                        std::size_t goal_index) {
  if (res.graph == nullptr || res.victim == nullptr) throw UsageError("attack needs a graph and a victim");
  const Graph& g = *res.graph;
  if (goal.target >= g.num_nodes() || goal.label >= g.num_labels()) throw ValidationError("attack goal out of range");
  const auto t0 = std::chrono::steady_clock::now();
  ModelOracle oracle(*res.victim);

  AttackReport r;
  r.goal_index = goal_index;
  r.target = goal.target;
  r.label = goal.label;
  r.attacker = spec.name();
  r.victim = res.victim_name;
  const ProbRow clean = res.victim->clean_row(goal.target);
  r.clean_label = static_cast<LabelId>(argmax(clean));
  r.clean_prob = clean[goal.label];

  ProbRow final_row;
  auto need_predictions = [&] {
    if (res.predictions.size() != g.num_nodes()) throw UsageError(r.attacker + " needs the victim's clean predictions");
  };
  auto grad_model = [&]() -> const VictimModel& {
    const VictimModel* m = spec.grad == GradSource::kSurrogate ? res.surrogate : res.victim;
    if (m == nullptr) throw UsageError(r.attacker + " needs a surrogate model");
    return *m;
  };
  auto finish = [&](const InjectedGraph& ig) {
    r.features.assign(ig.features().begin(), ig.features().end());
    r.steps = ig.num_injected_features();
    final_row = oracle.query_row(ig);
  };

  switch (spec.kind) {
    case AttackerKind::kClean:
      final_row = clean;
      break;
    case AttackerKind::kRandom: {
      need_predictions();
      Rng rng = derive_rng(res.seed, "random-attack-" + std::to_string(goal_index));
      finish(random_attack(g, res.predictions, goal, res.budget, rng));
      break;
    }
    case AttackerKind::kMostAttr:
      need_predictions();
      finish(mostattr_attack(g, res.predictions, goal, res.budget));
      break;
    case AttackerKind::kOneShot:
      finish(oneshot_grad_attack(g, grad_model(), goal, res.budget));
      break;
    case AttackerKind::kGreedy:
      finish(greedy_grad_attack(g, grad_model(), goal, res.budget));
      break;
    case AttackerKind::kGsnia: {
      if (res.agent == nullptr || res.bank == nullptr) throw UsageError("gsnia needs a trained agent and a label bank");
      AttackEnv env(g, oracle, res.budget);
      const AttackGoal goals[] = {goal};
      const auto finals = greedy_rollouts(*res.agent, env, *res.bank, goals, 1, 1);
      const auto& st = finals.front();
      r.features.assign(st.injected.features().begin(), st.injected.features().end());
      r.steps = st.step;
      final_row = st.last_row;
      break;
    }
  }
  r.final_prob = final_row[goal.label];
  r.delta_prob = r.final_prob - r.clean_prob;
  r.success = argmax(final_row) == goal.label;
  r.queries = oracle.queries();
  if (res.timing) {
    r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  }
  return r;
}

std::vector<AttackReport> run_attacks(const AttackResources& res, const AttackerSpec& spec,
                                      std::span<const AttackGoal> goals, std::size_t workers) {
  std::vector<AttackReport> out(goals.size());
  parallel_for(goals.size(), workers, [&](std::size_t i) { out[i] = run_attack(res, spec, goals[i], i); });
  return out;
}

std::vector<NodeId> take_targets(std::span<const NodeId> targets, std::size_t count, std::uint64_t seed) {
  std::vector<NodeId> all(targets.begin(), targets.end());
  if (count == 0 || count >= all.size()) return all;
  Rng rng = derive_rng(seed, "target-subset");
  for (std::size_t i = 0; i < count; ++i) std::swap(all[i], all[i + uniform_index(rng, all.size() - i)]);
  all.resize(count);
  std::sort(all.begin(), all.end());
  return all;
}

void write_report_json(std::ostream& os, const AttackReport& r) {
  nlohmann::ordered_json j;
  j["goal"] = r.goal_index;
  j["target"] = r.target;
  j["label"] = r.label;
  j["clean_label"] = r.clean_label;
  j["attacker"] = r.attacker;
  j["victim"] = r.victim;
  j["success"] = r.success;
  j["clean_prob"] = r.clean_prob;
  j["final_prob"] = r.final_prob;
  j["delta_prob"] = r.delta_prob;
  j["steps"] = r.steps;
  j["features"] = r.features;
  j["queries"] = r.queries;
  if (r.wall_ms) j["wall_ms"] = *r.wall_ms;
  os << j.dump() << '\n';
}

AttackReport parse_report_json(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    AttackReport r;
    r.goal_index = j.at("goal").get<std::size_t>();
    r.target = j.at("target").get<NodeId>();
    r.label = j.at("label").get<LabelId>();
    r.clean_label = j.at("clean_label").get<LabelId>();
    r.attacker = j.at("attacker").get<std::string>();
    r.victim = j.at("victim").get<std::string>();
    r.success = j.at("success").get<bool>();
    r.clean_prob = j.at("clean_prob").get<double>();
    r.final_prob = j.at("final_prob").get<double>();
    r.delta_prob = j.at("delta_prob").get<double>();
    r.steps = j.at("steps").get<std::size_t>();
    r.features = j.at("features").get<std::vector<FeatureId>>();
    r.queries = j.at("queries").get<std::uint64_t>();
    if (j.contains("wall_ms")) r.wall_ms = j.at("wall_ms").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed report record: ") + e.what());
  }
}

std::vector<AttackReport> read_reports_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open reports file " + path.string());
  std::vector<AttackReport> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(parse_report_json(line));
  }
  return out;
}

double SuccessTable::mean(std::size_t attacker) const {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& row : rates) {
    if (!std::isnan(row[attacker])) {
      s += row[attacker];
      ++n;
    }
  }
  return n == 0 ? kNaN : s / static_cast<double>(n);
}

std::size_t SuccessTable::column(const std::string& attacker) const {
  const auto it = std::find(attackers.begin(), attackers.end(), attacker);
  if (it == attackers.end()) throw UsageError("no reports for attacker " + attacker);
  return static_cast<std::size_t>(it - attackers.begin());
}

SuccessTable success_rates(std::span<const AttackReport> reports, std::size_t num_labels) {
  SuccessTable t;
  for (const auto& r : reports) {
    if (std::find(t.attackers.begin(), t.attackers.end(), r.attacker) == t.attackers.end()) t.attackers.push_back(r.attacker);
  }
  const std::size_t a = t.attackers.size();
  std::vector<std::vector<std::size_t>> hits(num_labels, std::vector<std::size_t>(a, 0));
  t.goals.assign(num_labels, std::vector<std::size_t>(a, 0));
  for (const auto& r : reports) {
    if (r.label >= num_labels) throw ValidationError("report label out of range");
    const std::size_t c = t.column(r.attacker);
    ++t.goals[r.label][c];
    hits[r.label][c] += r.success ? 1 : 0;
  }
  t.rates.assign(num_labels, std::vector<double>(a, kNaN));
  for (std::size_t y = 0; y < num_labels; ++y)
    for (std::size_t c = 0; c < a; ++c)
      if (t.goals[y][c] > 0) t.rates[y][c] = static_cast<double>(hits[y][c]) / static_cast<double>(t.goals[y][c]);
  return t;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void write_success_csv(std::ostream& os, const SuccessTable& t) {
  os << "label";
  for (const auto& a : t.attackers) os << ',' << a;
  os << '\n';
  for (std::size_t y = 0; y < t.rates.size(); ++y) {
    os << y;
    for (double v : t.rates[y]) os << ',' << format_double(v);
    os << '\n';
  }
  os << "mean";
  for (std::size_t c = 0; c < t.attackers.size(); ++c) os << ',' << format_double(t.mean(c));
  os << '\n';
}

std::vector<std::vector<double>> heatmap_matrix(std::span<const AttackReport> reports, std::size_t num_labels) {
  std::vector<std::vector<double>> sum(num_labels, std::vector<double>(num_labels, 0.0));
  std::vector<std::vector<std::size_t>> count(num_labels, std::vector<std::size_t>(num_labels, 0));
  for (const auto& r : reports) {
    if (r.clean_label >= num_labels || r.label >= num_labels) throw ValidationError("report label out of range");
    sum[r.clean_label][r.label] += r.delta_prob;
    ++count[r.clean_label][r.label];
  }
  std::size_t empty = 0;
  for (std::size_t i = 0; i < num_labels; ++i) {
    for (std::size_t j = 0; j < num_labels; ++j) {
      if (count[i][j] == 0) {
        sum[i][j] = kNaN;
        ++empty;
      } else {
        sum[i][j] /= static_cast<double>(count[i][j]);
      }
    }
  }
  if (empty > 0) log::warn("heatmap: " + std::to_string(empty) + " empty cell(s) written as NaN");
  return sum;
}

void write_matrix_csv(std::ostream& os, const std::vector<std::vector<double>>& m) {
  os << "original\\targeted";
  for (std::size_t j = 0; j < (m.empty() ? 0 : m.front().size()); ++j) os << ',' << j;
  os << '\n';
  for (std::size_t i = 0; i < m.size(); ++i) {
    os << i;
    for (double v : m[i]) os << ',' << format_double(v);
    os << '\n';
  }
}

SweepResult budget_sweep(const Graph& g, const VictimOracle& victim, const Agent& agent, const LabelBank& bank,
                         std::span<const AttackGoal> goals, std::span<const std::size_t> budgets, std::size_t workers) {
  SweepResult s;
  const std::size_t y_count = g.num_labels();
  for (std::size_t b : budgets) {
    if (b > g.num_features()) {
      log::warn("budget sweep: budget " + std::to_string(b) + " exceeds F; capped at " + std::to_string(g.num_features()));
      b = g.num_features();
    }
    AttackEnv env(g, victim, b);
    const auto finals = greedy_rollouts(agent, env, bank, goals, 64, workers);
    std::vector<double> sum(y_count, 0.0);
    std::vector<std::size_t> n(y_count, 0);
    for (const auto& st : finals) {
      sum[st.goal.label] += st.last_prob;
      ++n[st.goal.label];
    }
    std::vector<double> mean(y_count, kNaN);
    for (std::size_t y = 0; y < y_count; ++y)
      if (n[y] > 0) mean[y] = sum[y] / static_cast<double>(n[y]);
    s.budgets.push_back(b);
    s.means.push_back(std::move(mean));
  }
  return s;
}

void write_sweep_csv(std::ostream& os, const SweepResult& s, std::size_t num_labels) {
  os << "budget";
  for (std::size_t y = 0; y < num_labels; ++y) os << ",label" << y;
  os << '\n';
  for (std::size_t b = 0; b < s.budgets.size(); ++b) {
    os << s.budgets[b];
    for (double v : s.means[b]) os << ',' << format_double(v);
    os << '\n';
  }
}

void write_manifest(const std::filesystem::path& out_dir, const std::string& hash,
                    const std::vector<std::string>& artifacts) {
  nlohmann::ordered_json j;
  j["config_hash"] = hash;
  j["artifacts"] = artifacts;
  std::ofstream out(out_dir / "manifest.json");
  if (!out) throw Error("cannot write " + (out_dir / "manifest.json").string());
  out << j.dump(2) << '\n';
}

}  // namespace gnninject
