#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gnninject/agent/trainer.hpp"
#include "gnninject/core/errors.hpp"
#include "gnninject/core/kernels.hpp"
#include "gnninject/core/log.hpp"
#include "gnninject/graph/io.hpp"
#include "gnninject/graph/splits.hpp"
#include "gnninject/harness/config.hpp"
#include "gnninject/harness/harness.hpp"
#include "gnninject/models/oracle.hpp"
#include "gnninject/tensor/checkpoint.hpp"

namespace fs = std::filesystem;
using namespace gnninject;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Dataset {
  Graph graph;
  SplitSpec split;
};

Dataset load_data(const fs::path& dir) {
  if (!fs::exists(dir / "meta.tsv")) {
    throw UsageError("no dataset at " + dir.string() + " (expected meta.tsv; run `gnninject dataset prep --out " +
                     dir.string() + "`)");
  }
  Dataset d;
  d.graph = load_dataset_dir(dir);
  d.split = load_splits(dir, d.graph.num_nodes());
  return d;
}

ad::Checkpoint load_checkpoint(const fs::path& path, const std::string& kind, const std::string& hint) {
  if (!fs::exists(path)) throw UsageError(kind + " checkpoint not found: " + path.string() + " (" + hint + ")");
  auto ck = ad::Checkpoint::load(path);
  if (ck.meta_value("kind") != kind) throw UsageError(path.string() + " is not a " + kind + " checkpoint");
  return ck;
}

VictimModel load_victim(const fs::path& path, const Graph& g) {
  auto m = VictimModel::from_checkpoint(
      load_checkpoint(path, "victim", "run `gnninject victim train --out " + path.string() + "`"));
  if (m.num_features() != g.num_features() || m.num_labels() != g.num_labels()) {
    throw DimensionError("checkpoint " + path.string() + " does not match the dataset dimensions");
  }
  m.bind(g);
  return m;
}

Agent load_agent(const fs::path& path) {
  return Agent::from_checkpoint(load_checkpoint(path, "agent", "run `gnninject agent train` first"));
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::size_t resolve_budget(std::size_t requested, const Graph& g) {
  return requested == 0 ? max_feature_budget(g) : requested;
}

/// Canonical rendering of a subcommand's effective options (defaults included).
std::string effective_config(const CLI::App* sub) { return sub->config_to_str(true, false); }

/// `--config FILE` supplies key=value defaults: each key becomes `--key=value`
/// right after the two command words unless the key is also given on the
/// command line.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string cfg_path;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      cfg_path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      cfg_path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (cfg_path.empty()) return rest;
  if (rest.size() < 2) throw UsageError("--config needs a command, e.g. `gnninject attack run --config run.cfg`");
  auto given = [&](const std::string& key) {
    for (const auto& a : rest) {
      if (a == "--" + key || a.rfind("--" + key + "=", 0) == 0) return true;
    }
    return false;
  };
  std::vector<std::string> out(rest.begin(), rest.begin() + 2);
  for (const auto& [k, v] : load_kv_config(cfg_path)) {
    if (given(k)) continue;
    // list values become repeated flags
    const auto items = k == "attacker" || k == "reports" || k == "budgets" ? split_list(v) : std::vector<std::string>{v};
    for (const auto& item : items) out.push_back("--" + k + "=" + item);
  }
  out.insert(out.end(), rest.begin() + 2, rest.end());
  return out;
}

// ---- dataset prep -------------------------------------------------------

struct PrepArgs {
  std::string format = "tsv";
  fs::path raw, content, cites, out;
  std::uint64_t seed = 0;
  std::size_t max_targets = kMaxTargets;
};

void run_prep(const PrepArgs& a) {
  Graph raw;
  if (a.format == "linqs") {
    if (a.content.empty() || a.cites.empty()) throw UsageError("--format linqs needs --content and --cites");
    raw = import_linqs(a.content, a.cites);
  } else if (a.format == "tsv") {
    if (a.raw.empty()) throw UsageError("--format tsv needs --raw DIR");
    raw = load_dataset_dir(a.raw);
  } else {
    throw UsageError("unknown --format " + a.format + " (expected linqs or tsv)");
  }
  const auto lcc = largest_connected_component(raw);
  const Graph& g = lcc.graph;
  fs::create_directories(a.out);
  write_dataset(g, a.out);
  const auto split = make_splits(g, a.seed, a.max_targets);
  write_splits(split, a.out);
  nlohmann::ordered_json j;
  j["nodes"] = g.num_nodes();
  j["edges"] = g.num_edges();
  j["features"] = g.num_features();
  j["labels"] = g.num_labels();
  j["max_feature_budget"] = max_feature_budget(g);
  j["raw_nodes"] = raw.num_nodes();
  j["train"] = split.train.size();
  j["val"] = split.val.size();
  j["test"] = split.test.size();
  j["targets"] = split.targets.size();
  j["seed"] = a.seed;
  write_text(a.out / "summary.json", j.dump(2) + "\n");
  std::cout << j.dump() << '\n';
}

// ---- victim train -------------------------------------------------------

struct VictimArgs {
  fs::path data, out;
  std::string arch = "gcn";
  std::uint64_t seed = 0;
  std::size_t epochs = 300, hidden = 64, layers = 0, power = 0;
  double lr = 0.01, weight_decay = 5e-4;
  bool timing = false;
};

void run_victim_train(const VictimArgs& a) {
  const auto t0 = Clock::now();
  const Dataset d = load_data(a.data);
  auto arch = GnnArchitecture::defaults(parse_arch(a.arch));
  arch.hidden = a.hidden;
  if (a.layers > 0) arch.layers = a.layers;
  if (a.power > 0) arch.power = a.power;
  VictimTrainConfig cfg{a.epochs, a.lr, a.weight_decay};
  const auto tv = train_victim(d.graph, d.split, arch, a.seed, cfg);
  if (a.out.has_parent_path()) fs::create_directories(a.out.parent_path());
  tv.model.to_checkpoint().save(a.out);
  nlohmann::ordered_json j;
  j["arch"] = std::string(arch_name(arch.kind));
  j["seed"] = a.seed;
  j["best_epoch"] = tv.stats.best_epoch;
  j["train_accuracy"] = tv.stats.train_accuracy;
  j["val_accuracy"] = tv.stats.val_accuracy;
  j["test_accuracy"] = tv.stats.test_accuracy;
  write_text(fs::path(a.out.string() + ".json"), j.dump(2) + "\n");
  std::cout << j.dump() << '\n';
  if (a.timing) std::cerr << "victim train: " << seconds_since(t0) << " s\n";
}

// ---- agent train --------------------------------------------------------

struct AgentArgs {
  fs::path data, victim, out;
  std::uint64_t seed = 0;
  std::size_t budget = 0, targets = 0;
  AgentShape shape;
  PpoConfig ppo;
  bool timing = false;
};

void run_agent_train(const AgentArgs& a, const std::string& config_text) {
  const auto t0 = Clock::now();
  const Dataset d = load_data(a.data);
  const VictimModel victim = load_victim(a.victim, d.graph);
  ModelOracle oracle(victim);
  const LabelBank bank = build_label_bank(d.graph, oracle);
  const auto targets = take_targets(d.split.targets, a.targets, a.seed);
  AttackEnv env(d.graph, oracle, resolve_budget(a.budget, d.graph));
  AgentShape shape = a.shape;
  shape.num_features = d.graph.num_features();

  fs::create_directories(a.out);
  std::ofstream log_out(a.out / "train_log.jsonl", std::ios::binary);
  const auto result = train_agent(env, bank, targets, shape, a.ppo, a.seed, &log_out);
  result.best.to_checkpoint().save(a.out / "agent.ckpt");
  nlohmann::ordered_json j;
  j["best_epoch"] = result.best_epoch;
  j["best_eval_success"] = result.best_eval_success;
  j["epochs_run"] = result.log.size();
  j["early_stopped"] = result.early_stopped;
  j["budget"] = env.budget();
  write_text(a.out / "summary.json", j.dump(2) + "\n");
  write_manifest(a.out, config_hash(parse_kv_config(config_text)), {"agent.ckpt", "train_log.jsonl", "summary.json"});
  std::cout << j.dump() << '\n';
  if (a.timing) std::cerr << "agent train: " << seconds_since(t0) << " s\n";
}

// ---- attack run ---------------------------------------------------------

struct AttackArgs {
  fs::path data, victim, surrogate, agent, out;
  std::vector<std::string> attackers{"clean", "random", "mostattr"};
  std::string grad_source = "victim";
  std::uint64_t seed = 0;
  std::size_t budget = 0, targets = 0, workers = 1;
  bool timing = false;
};

void run_attack_cmd(const AttackArgs& a, const std::string& config_text) {
  const auto t0 = Clock::now();
  const Dataset d = load_data(a.data);
  const VictimModel victim = load_victim(a.victim, d.graph);
  std::vector<AttackerSpec> specs;
  for (const auto& name : a.attackers) specs.push_back(parse_attacker(name, a.grad_source));

  AttackResources res;
  res.graph = &d.graph;
  res.victim = &victim;
  res.victim_name = std::string(arch_name(victim.arch().kind));
  res.predictions = victim.clean_predictions();
  res.budget = resolve_budget(a.budget, d.graph);
  res.seed = a.seed;
  res.timing = a.timing;

  VictimModel surrogate;
  Agent agent;
  LabelBank bank;
  for (const auto& s : specs) {
    if (s.grad == GradSource::kSurrogate && res.surrogate == nullptr) {
      if (a.surrogate.empty()) throw UsageError(s.name() + " needs --surrogate CHECKPOINT");
      surrogate = load_victim(a.surrogate, d.graph);
      res.surrogate = &surrogate;
    }
    if (s.kind == AttackerKind::kGsnia && res.agent == nullptr) {
      if (a.agent.empty()) throw UsageError("gsnia needs --agent CHECKPOINT");
      agent = load_agent(a.agent);
      if (agent.shape().num_features != d.graph.num_features()) throw DimensionError("agent does not match the dataset");
      bank = build_label_bank(d.graph, res.predictions);
      res.agent = &agent;
      res.bank = &bank;
    }
  }

  const auto goals = goal_grid(take_targets(d.split.targets, a.targets, a.seed), d.graph.num_labels());
  std::vector<AttackReport> reports;
  for (const auto& s : specs) {
    const auto ts = Clock::now();
    auto r = run_attacks(res, s, goals, a.workers);
    if (a.timing) std::cerr << s.name() << ": " << seconds_since(ts) << " s for " << goals.size() << " goals\n";
    reports.insert(reports.end(), r.begin(), r.end());
  }

  fs::create_directories(a.out);
  {
    std::ofstream out(a.out / "reports.jsonl", std::ios::binary);
    for (const auto& r : reports) write_report_json(out, r);
  }
  const auto table = success_rates(reports, d.graph.num_labels());
  std::ostringstream csv;
  write_success_csv(csv, table);
  write_text(a.out / "success_rates.csv", csv.str());
  write_manifest(a.out, config_hash(parse_kv_config(config_text)), {"reports.jsonl", "success_rates.csv"});
  std::cout << csv.str();
  if (a.timing) std::cerr << "attack run: " << seconds_since(t0) << " s\n";
}

// ---- reports ------------------------------------------------------------

struct HeatmapArgs {
  std::vector<fs::path> reports;
  std::string attacker;
  std::size_t labels = 0;
  fs::path out;
};

void run_heatmap(const HeatmapArgs& a) {
  std::vector<AttackReport> pooled;
  std::size_t max_label = 0;
  for (const auto& p : a.reports) {
    for (auto& r : read_reports_jsonl(p)) {
      max_label = std::max<std::size_t>({max_label, r.label, r.clean_label});
      if (r.attacker == a.attacker) pooled.push_back(std::move(r));
    }
  }
  if (pooled.empty()) throw UsageError("no reports for attacker " + a.attacker);
  const std::size_t y = a.labels > 0 ? a.labels : max_label + 1;
  std::ostringstream csv;
  write_matrix_csv(csv, heatmap_matrix(pooled, y));
  if (a.out.has_parent_path()) fs::create_directories(a.out.parent_path());
  write_text(a.out, csv.str());
  std::cout << csv.str();
}

struct SweepArgs {
  fs::path data, victim, agent, out;
  std::vector<std::size_t> budgets;
  std::uint64_t seed = 0;
  std::size_t targets = 0, workers = 1;
  bool timing = false;
};

void run_sweep(const SweepArgs& a) {
  const auto t0 = Clock::now();
  const Dataset d = load_data(a.data);
  const VictimModel victim = load_victim(a.victim, d.graph);
  ModelOracle oracle(victim);
  const Agent agent = load_agent(a.agent);
  if (agent.shape().num_features != d.graph.num_features()) throw DimensionError("agent does not match the dataset");
  const LabelBank bank = build_label_bank(d.graph, oracle);
  std::vector<std::size_t> budgets = a.budgets;
  if (budgets.empty()) {
    const std::size_t b = max_feature_budget(d.graph);
    budgets = {0, 1, b / 2, b, b + b / 2, 2 * b};
  }
  const auto goals = goal_grid(take_targets(d.split.targets, a.targets, a.seed), d.graph.num_labels());
  const auto sweep = budget_sweep(d.graph, oracle, agent, bank, goals, budgets, a.workers);
  std::ostringstream csv;
  write_sweep_csv(csv, sweep, d.graph.num_labels());
  if (a.out.has_parent_path()) fs::create_directories(a.out.parent_path());
  write_text(a.out, csv.str());
  std::cout << csv.str();
  if (a.timing) std::cerr << "report sweep: " << seconds_since(t0) << " s\n";
}

log::Level parse_level(const std::string& s) {
  if (s == "debug") return log::Level::kDebug;
  if (s == "info") return log::Level::kInfo;
  if (s == "warn") return log::Level::kWarn;
  if (s == "error") return log::Level::kError;
  if (s == "off") return log::Level::kOff;
  throw UsageError("unknown log level " + s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-node injection label-specificity attacks on graph neural networks."};
  app.require_subcommand(1);
  std::string level = "info";
  std::string isa;
  app.add_option("--log-level", level, "debug, info, warn, error or off")->capture_default_str();
  app.add_option("--isa", isa, "force the kernel variant (scalar or avx2)");
  app.set_help_all_flag("--help-all", "help for every command");
  app.footer("Any command also accepts --config FILE with key = value lines; keys are long option names.");

  auto* dataset = app.add_subcommand("dataset", "dataset preparation")->require_subcommand(1);
  PrepArgs prep;
  auto* prep_cmd = dataset->add_subcommand("prep", "import a raw dump, keep the largest connected component, write splits");
  prep_cmd->add_option("--format", prep.format, "linqs (cora.content + cora.cites) or tsv (raw TSV directory)")->capture_default_str();
  prep_cmd->add_option("--raw", prep.raw, "raw TSV directory (meta/edges/features/labels.tsv)");
  prep_cmd->add_option("--content", prep.content, "LINQS .content file");
  prep_cmd->add_option("--cites", prep.cites, "LINQS .cites file");
  prep_cmd->add_option("--out", prep.out, "output dataset directory")->required();
  prep_cmd->add_option("--seed", prep.seed, "master seed for the splits")->capture_default_str();
  prep_cmd->add_option("--max-targets", prep.max_targets, "target set size cap")->capture_default_str();

  auto* victim = app.add_subcommand("victim", "victim models")->require_subcommand(1);
  VictimArgs va;
  auto* vt = victim->add_subcommand("train", "train a victim or surrogate and save its checkpoint");
  vt->add_option("--data", va.data, "prepared dataset directory")->required();
  vt->add_option("--arch", va.arch, "gcn, sgc, tagcn, gcnii or surrogate")->capture_default_str();
  vt->add_option("--out", va.out, "checkpoint path (stats go to <out>.json)")->required();
  vt->add_option("--seed", va.seed, "master seed")->capture_default_str();
  vt->add_option("--epochs", va.epochs, "training epochs")->capture_default_str();
  vt->add_option("--hidden", va.hidden, "hidden width")->capture_default_str();
  vt->add_option("--layers", va.layers, "layer count (0 keeps the architecture default)")->capture_default_str();
  vt->add_option("--power", va.power, "propagation power for sgc/tagcn (0 keeps the default)")->capture_default_str();
  vt->add_option("--lr", va.lr, "Adam learning rate")->capture_default_str();
  vt->add_option("--weight-decay", va.weight_decay, "L2 penalty on all weights")->capture_default_str();
  vt->add_flag("--timing", va.timing, "print wall time to stderr");

  auto* agent = app.add_subcommand("agent", "attack agent")->require_subcommand(1);
  AgentArgs aa;
  auto* at = agent->add_subcommand("train", "train the PPO injection agent against a victim");
  at->add_option("--data", aa.data, "prepared dataset directory")->required();
  at->add_option("--victim", aa.victim, "victim checkpoint")->required();
  at->add_option("--out", aa.out, "output directory (agent.ckpt, train_log.jsonl)")->required();
  at->add_option("--seed", aa.seed, "master seed")->capture_default_str();
  at->add_option("--budget", aa.budget, "feature budget (0: max features of any node)")->capture_default_str();
  at->add_option("--targets", aa.targets, "seeded uniform subset of N split targets (0: all)")->capture_default_str();
  at->add_option("--hidden", aa.shape.hidden, "MLP width")->capture_default_str();
  at->add_option("--policy-layers", aa.shape.policy_layers, "policy MLP layers")->capture_default_str();
  at->add_option("--value-layers", aa.shape.value_layers, "value MLP layers")->capture_default_str();
  at->add_option("--epochs", aa.ppo.train_epochs, "collection phases")->capture_default_str();
  at->add_option("--parallel-envs", aa.ppo.parallel_envs, "environments per phase")->capture_default_str();
  at->add_option("--steps-per-env", aa.ppo.steps_per_env, "steps per environment per phase")->capture_default_str();
  at->add_option("--update-steps", aa.ppo.update_steps, "minibatch updates per phase")->capture_default_str();
  at->add_option("--batch", aa.ppo.batch, "minibatch size")->capture_default_str();
  at->add_option("--lr", aa.ppo.lr, "initial Adam learning rate (decays linearly to 0)")->capture_default_str();
  at->add_option("--gamma", aa.ppo.gamma, "discount")->capture_default_str();
  at->add_option("--lambda", aa.ppo.lambda, "GAE lambda")->capture_default_str();
  at->add_option("--clip", aa.ppo.clip, "ratio clip epsilon")->capture_default_str();
  at->add_option("--entropy-coef", aa.ppo.entropy_coef, "entropy weight beta")->capture_default_str();
  at->add_option("--value-coef", aa.ppo.value_coef, "value loss weight")->capture_default_str();
  at->add_option("--max-grad-norm", aa.ppo.max_grad_norm, "global gradient clip")->capture_default_str();
  at->add_option("--eval-every", aa.ppo.eval_every, "phases between greedy evaluations")->capture_default_str();
  at->add_option("--patience", aa.ppo.patience, "evaluations without improvement before stopping")->capture_default_str();
  at->add_option("--eval-goals", aa.ppo.eval_goals, "evaluation grid cap")->capture_default_str();
  at->add_option("--workers", aa.ppo.workers, "environment threads (results do not depend on it)")->capture_default_str();
  at->add_flag("--timing", aa.timing, "print wall time to stderr");

  auto* attack = app.add_subcommand("attack", "attack evaluation")->require_subcommand(1);
  AttackArgs ka;
  auto* ar = attack->add_subcommand("run", "run attackers over targets x labels; writes reports.jsonl and success_rates.csv");
  ar->add_option("--data", ka.data, "prepared dataset directory")->required();
  ar->add_option("--victim", ka.victim, "victim checkpoint")->required();
  ar->add_option("--surrogate", ka.surrogate, "surrogate checkpoint (black-box gradients)");
  ar->add_option("--agent", ka.agent, "agent checkpoint (gsnia)");
  ar->add_option("--attacker", ka.attackers, "clean, random, mostattr, oneshot, greedy, gsnia (repeat or comma-separate)")
      ->delimiter(',')
      ->capture_default_str();
  ar->add_option("--grad-source", ka.grad_source, "victim (white-box) or surrogate (black-box)")->capture_default_str();
  ar->add_option("--out", ka.out, "output directory")->required();
  ar->add_option("--seed", ka.seed, "master seed")->capture_default_str();
  ar->add_option("--budget", ka.budget, "feature budget (0: max features of any node)")->capture_default_str();
  ar->add_option("--targets", ka.targets, "seeded uniform subset of N split targets (0: all)")->capture_default_str();
  ar->add_option("--workers", ka.workers, "goal-level threads")->capture_default_str();
  ar->add_flag("--timing", ka.timing, "record wall_ms per attack (outputs then differ between runs)");

  auto* report = app.add_subcommand("report", "aggregates")->require_subcommand(1);
  HeatmapArgs ha;
  auto* rh = report->add_subcommand("heatmap", "mean probability change by (original label, targeted label)");
  rh->add_option("--reports", ha.reports, "reports.jsonl files, one per victim (repeatable)")->required()->delimiter(',');
  rh->add_option("--attacker", ha.attacker, "attacker name as written in the reports")->required();
  rh->add_option("--labels", ha.labels, "label count (0: infer from the reports)")->capture_default_str();
  rh->add_option("--out", ha.out, "output CSV")->required();
  SweepArgs sa;
  auto* rs = report->add_subcommand("sweep", "mean target probability under varying budgets, no retraining");
  rs->add_option("--data", sa.data, "prepared dataset directory")->required();
  rs->add_option("--victim", sa.victim, "victim checkpoint")->required();
  rs->add_option("--agent", sa.agent, "agent checkpoint")->required();
  rs->add_option("--budgets", sa.budgets, "budgets (default 0,1,B/2,B,3B/2,2B)")->delimiter(',');
  rs->add_option("--targets", sa.targets, "seeded uniform subset of N split targets (0: all)")->capture_default_str();
  rs->add_option("--workers", sa.workers, "threads")->capture_default_str();
  rs->add_option("--out", sa.out, "output CSV")->required();
  rs->add_flag("--timing", sa.timing, "print wall time to stderr");
  rs->add_option("--seed", sa.seed, "master seed (target subset)")->capture_default_str();

  try {
    auto args = expand_config(argc, argv);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const gnninject::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    log::set_level(parse_level(level));
    if (!isa.empty()) simd::select(simd::parse_isa(isa));
    if (*prep_cmd) run_prep(prep);
    else if (*vt) run_victim_train(va);
    else if (*at) run_agent_train(aa, effective_config(at));
    else if (*ar) run_attack_cmd(ka, effective_config(ar));
    else if (*rh) run_heatmap(ha);
    else if (*rs) run_sweep(sa);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
