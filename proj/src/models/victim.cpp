#include "gnninject/models/victim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "gnninject/core/errors.hpp"
#include "gnninject/core/kernels.hpp"
#include "gnninject/core/log.hpp"
#include "gnninject/core/rng.hpp"
#include "gnninject/tensor/adam.hpp"
#include "gnninject/tensor/ops.hpp"

namespace gnninject {

using ad::Tensor;

// Local evaluator form shared by the 2-hop architectures:
//   s_u = sum_{w in N(u)+u} n_u n_w P_w,  P = X * first
//   z   = (sum_{u in N(t)+t} n_t n_u act(s_u)) * second
// with act = relu or identity and `second` possibly absent.
struct VictimModel::Cache {
  const Graph* graph = nullptr;
  std::shared_ptr<const SparseMatrix> adj;
  std::shared_ptr<const SparseMatrix> features;
  std::vector<double> clean_probs;
  std::vector<double> inv_sqrt_deg;

  bool local = false;
  bool relu = false;
  std::size_t width = 0;
  std::vector<double> first;   // F x width
  std::vector<double> second;  // width x Y, empty when absent
  std::vector<double> proj;    // N x width
};

std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

namespace {

/// 17 significant digits; parses back to the same double.
std::string exact_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Tensor glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  Tensor t(fan_in, fan_out, true);
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.mutable_values()) v = bound * (2.0 * uniform01(rng) - 1.0);
  return t;
}

void softmax_inplace(std::span<double> z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (auto& v : z) s += (v = std::exp(v - mx));
  for (auto& v : z) v /= s;
}

std::vector<double> dense_product(const std::vector<double>& a, std::size_t m, std::size_t k,
                                  const std::vector<double>& b, std::size_t n) {
  std::vector<double> c(m * n, 0.0);
  simd::active().gemm(m, n, k, a.data(), k, b.data(), n, c.data(), n);
  return c;
}

}  // namespace

VictimModel::VictimModel(const GnnArchitecture& arch, std::size_t num_features, std::size_t num_labels,
                         std::uint64_t seed)
    : arch_(arch), num_features_(num_features), num_labels_(num_labels) {
  arch_.validate();
  if (num_features == 0 || num_labels == 0) throw ValidationError("model needs F >= 1 and Y >= 1");
  Rng rng = derive_rng(seed, "victim-init");
  const std::size_t f = num_features, h = arch.hidden, y = num_labels;
  switch (arch.kind) {
    case ArchKind::kGcn:
      for (std::size_t l = 1; l <= arch.layers; ++l) {
        const std::size_t in = l == 1 ? f : h, out = l == arch.layers ? y : h;
        params_.emplace_back("W" + std::to_string(l), glorot(in, out, rng));
      }
      break;
    case ArchKind::kSgc:
      params_.emplace_back("W", glorot(f, y, rng));
      break;
    case ArchKind::kSurrogate:
      params_.emplace_back("W1", glorot(f, h, rng));
      params_.emplace_back("W2", glorot(h, y, rng));
      break;
    case ArchKind::kTagcn:
      for (std::size_t l = 1; l <= arch.layers; ++l) {
        const std::size_t in = l == 1 ? f : h, out = l == arch.layers ? y : h;
        for (std::size_t k = 0; k <= arch.power; ++k) {
          params_.emplace_back("W" + std::to_string(l) + "_" + std::to_string(k), glorot(in, out, rng));
        }
      }
      break;
    case ArchKind::kGcnii:
      params_.emplace_back("W_in", glorot(f, h, rng));
      for (std::size_t l = 1; l <= arch.layers; ++l) params_.emplace_back("W" + std::to_string(l), glorot(h, h, rng));
      params_.emplace_back("W_out", glorot(h, y, rng));
      break;
  }
}

std::vector<Tensor> VictimModel::parameter_tensors() const {
  std::vector<Tensor> out;
  for (const auto& [n, t] : params_) out.push_back(t);
  return out;
}

const Tensor& VictimModel::param(const std::string& name) const {
  for (const auto& [n, t] : params_) {
    if (n == name) return t;
  }
  throw ValidationError("model has no parameter '" + name + "'");
}

Tensor VictimModel::first_projection(const FeatureInput& x, const Tensor& w) const {
  if (x.sparse->cols != num_features_ || (x.dense_tail.defined() && x.dense_tail.cols() != num_features_)) {
    throw DimensionError("feature dimension does not match the model (F=" + std::to_string(num_features_) + ")");
  }
  Tensor p = ad::spmm(x.sparse, w);
  if (x.dense_tail.defined()) p = ad::stack_rows(p, ad::matmul(x.dense_tail, w));
  return p;
}

Tensor VictimModel::logits(const std::shared_ptr<const SparseMatrix>& adj, const FeatureInput& x) const {
  if (adj->rows != x.rows() || adj->cols != x.rows()) {
    throw DimensionError("adjacency " + std::to_string(adj->rows) + "x" + std::to_string(adj->cols) + " vs " +
                         std::to_string(x.rows()) + " feature rows");
  }
  switch (arch_.kind) {
    case ArchKind::kGcn: {
      Tensor h = ad::spmm(adj, first_projection(x, param("W1")));
      for (std::size_t l = 2; l <= arch_.layers; ++l) {
        h = ad::spmm(adj, ad::matmul(ad::relu(h), param("W" + std::to_string(l))));
      }
      return h;
    }
    case ArchKind::kSgc: {
      Tensor h = first_projection(x, param("W"));
      for (std::size_t k = 0; k < arch_.power; ++k) h = ad::spmm(adj, h);
      return h;
    }
    case ArchKind::kSurrogate: {
      const Tensor h = ad::matmul(first_projection(x, param("W1")), param("W2"));
      return ad::spmm(adj, ad::spmm(adj, h));
    }
    case ArchKind::kTagcn: {
      Tensor h;
      for (std::size_t l = 1; l <= arch_.layers; ++l) {
        auto lin = [&](std::size_t k) {
          const Tensor& w = param("W" + std::to_string(l) + "_" + std::to_string(k));
          return l == 1 ? first_projection(x, w) : ad::matmul(h, w);
        };
        // Horner form of sum_k Â^k H W_k.
        Tensor acc = lin(arch_.power);
        for (std::size_t k = arch_.power; k-- > 0;) acc = ad::add(ad::spmm(adj, acc), lin(k));
        h = l == arch_.layers ? acc : ad::relu(acc);
      }
      return h;
    }
    case ArchKind::kGcnii: {
      const Tensor h0 = ad::relu(first_projection(x, param("W_in")));
      Tensor h = h0;
      for (std::size_t l = 1; l <= arch_.layers; ++l) {
        const double beta = std::log(arch_.lambda / static_cast<double>(l) + 1.0);
        const Tensor s = ad::add(ad::scale(ad::spmm(adj, h), 1.0 - arch_.alpha), ad::scale(h0, arch_.alpha));
        h = ad::relu(ad::add(ad::scale(s, 1.0 - beta), ad::scale(ad::matmul(s, param("W" + std::to_string(l))), beta)));
      }
      return ad::matmul(h, param("W_out"));
    }
  }
  throw UsageError("unhandled architecture");
}

void VictimModel::freeze() {
  for (auto& [n, t] : params_) t = t.detach();
  if (cache_) bind(*cache_->graph);
}

void VictimModel::bind(const Graph& g) {
  if (g.num_features() != num_features_ || g.num_labels() != num_labels_) {
    throw DimensionError("graph has F=" + std::to_string(g.num_features()) + " Y=" + std::to_string(g.num_labels()) +
                         ", model expects F=" + std::to_string(num_features_) + " Y=" + std::to_string(num_labels_));
  }
  auto c = std::make_shared<Cache>();
  c->graph = &g;
  c->adj = std::make_shared<const SparseMatrix>(normalized_adjacency(g));
  c->features = std::make_shared<const SparseMatrix>(g.feature_matrix());
  const Tensor z = logits(c->adj, FeatureInput{c->features, {}});
  c->clean_probs.assign(z.values().begin(), z.values().end());
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    softmax_inplace(std::span<double>(c->clean_probs.data() + i * num_labels_, num_labels_));
  }
  c->inv_sqrt_deg.resize(g.num_nodes());
  for (NodeId u = 0; u < g.num_nodes(); ++u) c->inv_sqrt_deg[u] = 1.0 / std::sqrt(static_cast<double>(g.degree(u) + 1));

  c->local = arch_.two_hop_local();
  if (c->local) {
    const std::size_t f = num_features_, y = num_labels_;
    if (arch_.kind == ArchKind::kGcn) {
      const auto& w1 = param("W1");
      const auto& w2 = param("W2");
      c->relu = true;
      c->width = w1.cols();
      c->first.assign(w1.values().begin(), w1.values().end());
      c->second.assign(w2.values().begin(), w2.values().end());
    } else if (arch_.kind == ArchKind::kSgc) {
      const auto& w = param("W");
      c->width = y;
      c->first.assign(w.values().begin(), w.values().end());
    } else {
      const auto& w1 = param("W1");
      const auto& w2 = param("W2");
      c->width = y;
      c->first = dense_product({w1.values().begin(), w1.values().end()}, f, w1.cols(),
                               {w2.values().begin(), w2.values().end()}, y);
    }
    const auto& kern = simd::active();
    c->proj.assign(g.num_nodes() * c->width, 0.0);
    for (NodeId u = 0; u < g.num_nodes(); ++u) {
      for (FeatureId j : g.features(u)) {
        kern.axpy(1.0, c->first.data() + std::size_t(j) * c->width, c->proj.data() + std::size_t(u) * c->width, c->width);
      }
    }
  }
  cache_ = std::move(c);
}

const Graph& VictimModel::graph() const {
  if (!cache_) throw UsageError("model is not bound to a graph");
  return *cache_->graph;
}

std::span<const double> VictimModel::clean_probs() const {
  if (!cache_) throw UsageError("model is not bound to a graph");
  return cache_->clean_probs;
}

ProbRow VictimModel::clean_row(NodeId u) const {
  const auto p = clean_probs();
  return ProbRow(p.begin() + std::size_t(u) * num_labels_, p.begin() + (std::size_t(u) + 1) * num_labels_);
}

std::vector<LabelId> VictimModel::clean_predictions() const {
  const auto p = clean_probs();
  std::vector<LabelId> out(graph().num_nodes());
  for (std::size_t u = 0; u < out.size(); ++u) {
    out[u] = static_cast<LabelId>(argmax(p.subspan(u * num_labels_, num_labels_)));
  }
  return out;
}

const VictimModel::Cache& VictimModel::cache_for(const InjectedGraph& ig) const {
  if (!cache_) throw UsageError("model is not bound to a graph");
  if (&ig.base() != cache_->graph) throw UsageError("injected graph does not reference the model's bound graph");
  return *cache_;
}

ProbRow VictimModel::local_row(const InjectedGraph& ig) const {
  const Cache& c = cache_for(ig);
  const Graph& g = *c.graph;
  const std::size_t w = c.width;
  const NodeId t = ig.target();
  const auto& kern = simd::active();
  const double n_t = 1.0 / std::sqrt(static_cast<double>(g.degree(t) + 2));
  const double n_inj = 1.0 / std::sqrt(2.0);
  auto norm = [&](NodeId u) { return u == t ? n_t : c.inv_sqrt_deg[u]; };

  std::vector<double> p_inj(w, 0.0);
  for (FeatureId f : ig.features()) kern.axpy(1.0, c.first.data() + std::size_t(f) * w, p_inj.data(), w);

  std::vector<double> z(w, 0.0), s(w);
  auto finish = [&](double coef) {
    if (c.relu) {
      for (auto& v : s) v = v > 0.0 ? v : 0.0;
    }
    kern.axpy(coef, s.data(), z.data(), w);
  };
  // u ranges over the target, its base neighbours and the injected node.
  auto aggregate_base = [&](NodeId u) {
    const double nu = norm(u);
    std::fill(s.begin(), s.end(), 0.0);
    kern.axpy(nu * nu, c.proj.data() + std::size_t(u) * w, s.data(), w);
    for (NodeId v : g.neighbors(u)) kern.axpy(nu * norm(v), c.proj.data() + std::size_t(v) * w, s.data(), w);
    if (u == t) kern.axpy(nu * n_inj, p_inj.data(), s.data(), w);
    finish(n_t * nu);
  };
  aggregate_base(t);
  for (NodeId u : g.neighbors(t)) aggregate_base(u);
  std::fill(s.begin(), s.end(), 0.0);
  kern.axpy(n_inj * n_inj, p_inj.data(), s.data(), w);
  kern.axpy(n_inj * n_t, c.proj.data() + std::size_t(t) * w, s.data(), w);
  finish(n_t * n_inj);

  ProbRow out(num_labels_, 0.0);
  if (c.second.empty()) {
    std::copy(z.begin(), z.end(), out.begin());
  } else {
    kern.gemm(1, num_labels_, w, z.data(), w, c.second.data(), num_labels_, out.data(), num_labels_);
  }
  softmax_inplace(out);
  return out;
}

ProbRow VictimModel::query_row(const InjectedGraph& ig) const {
  const Cache& c = cache_for(ig);
  return c.local ? local_row(ig) : query_row_full(ig);
}

std::vector<double> VictimModel::injected_probs_full(const InjectedGraph& ig) const {
  const Cache& c = cache_for(ig);
  Tensor x(1, num_features_);
  for (FeatureId f : ig.features()) x(0, f) = 1.0;
  const auto adj = std::make_shared<const SparseMatrix>(ig.normalized_adjacency());
  const Tensor z = logits(adj, FeatureInput{c.features, x});
  std::vector<double> p(z.values().begin(), z.values().end());
  for (std::size_t i = 0; i < ig.num_nodes(); ++i) {
    softmax_inplace(std::span<double>(p.data() + i * num_labels_, num_labels_));
  }
  return p;
}

ProbRow VictimModel::query_row_full(const InjectedGraph& ig) const {
  const auto p = injected_probs_full(ig);
  const std::size_t t = ig.target();
  return ProbRow(p.begin() + t * num_labels_, p.begin() + (t + 1) * num_labels_);
}

std::vector<double> VictimModel::feature_gradient(const InjectedGraph& ig, LabelId y) const {
  const Cache& c = cache_for(ig);
  if (!c.local) return feature_gradient_autodiff(ig, y);
  const Graph& g = *c.graph;
  const std::size_t w = c.width;
  const NodeId t = ig.target();
  const auto& kern = simd::active();
  const double n_t = 1.0 / std::sqrt(static_cast<double>(g.degree(t) + 2));
  const double n_inj = 1.0 / std::sqrt(2.0);
  auto norm = [&](NodeId u) { return u == t ? n_t : c.inv_sqrt_deg[u]; };

  const ProbRow p = local_row(ig);
  // d p_y / d z_c = p_y (1[c = y] - p_c)
  std::vector<double> gz(num_labels_);
  for (std::size_t k = 0; k < num_labels_; ++k) gz[k] = p[y] * ((k == y ? 1.0 : 0.0) - p[k]);
  std::vector<double> gh(w, 0.0);
  if (c.second.empty()) {
    gh = gz;
  } else {
    for (std::size_t i = 0; i < w; ++i) gh[i] = kern.dot(c.second.data() + i * num_labels_, gz.data(), num_labels_);
  }

  // p_inj enters s_t (weight n_t n_inj) and s_inj (weight n_inj^2).
  std::vector<double> p_inj(w, 0.0);
  for (FeatureId f : ig.features()) kern.axpy(1.0, c.first.data() + std::size_t(f) * w, p_inj.data(), w);
  std::vector<double> g_pinj(w, 0.0);
  std::vector<double> s(w);
  auto add_path = [&](double out_coef, double in_coef) {
    for (std::size_t i = 0; i < w; ++i) {
      const double active = !c.relu || s[i] > 0.0 ? 1.0 : 0.0;
      g_pinj[i] += out_coef * in_coef * active * gh[i];
    }
  };
  std::fill(s.begin(), s.end(), 0.0);
  kern.axpy(n_t * n_t, c.proj.data() + std::size_t(t) * w, s.data(), w);
  for (NodeId v : g.neighbors(t)) kern.axpy(n_t * norm(v), c.proj.data() + std::size_t(v) * w, s.data(), w);
  kern.axpy(n_t * n_inj, p_inj.data(), s.data(), w);
  add_path(n_t * n_t, n_t * n_inj);
  std::fill(s.begin(), s.end(), 0.0);
  kern.axpy(n_inj * n_inj, p_inj.data(), s.data(), w);
  kern.axpy(n_inj * n_t, c.proj.data() + std::size_t(t) * w, s.data(), w);
  add_path(n_t * n_inj, n_inj * n_inj);

  std::vector<double> out(num_features_);
  for (std::size_t f = 0; f < num_features_; ++f) out[f] = kern.dot(c.first.data() + f * w, g_pinj.data(), w);
  return out;
}

std::vector<double> VictimModel::feature_gradient_autodiff(const InjectedGraph& ig, LabelId y) const {
  const Cache& c = cache_for(ig);
  Tensor x(1, num_features_, true);
  for (FeatureId f : ig.features()) x(0, f) = 1.0;
  const auto adj = std::make_shared<const SparseMatrix>(ig.normalized_adjacency());
  const Tensor z = logits(adj, FeatureInput{c.features, x});
  const std::size_t row[] = {ig.target()};
  const std::size_t col[] = {y};
  ad::backward(ad::pick(ad::softmax_rows(ad::select_rows(z, row)), col));
  const auto g = x.grad();
  return std::vector<double>(g.begin(), g.end());
}

ad::Checkpoint VictimModel::to_checkpoint() const {
  ad::Checkpoint ck;
  ck.meta["kind"] = "victim";
  ck.meta["arch"] = std::string(arch_name(arch_.kind));
  ck.meta["layers"] = std::to_string(arch_.layers);
  ck.meta["hidden"] = std::to_string(arch_.hidden);
  ck.meta["power"] = std::to_string(arch_.power);
  ck.meta["alpha"] = exact_double(arch_.alpha);
  ck.meta["lambda"] = exact_double(arch_.lambda);
  ck.meta["num_features"] = std::to_string(num_features_);
  ck.meta["num_labels"] = std::to_string(num_labels_);
  for (const auto& [n, t] : params_) ck.add(n, t);
  return ck;
}

VictimModel VictimModel::from_checkpoint(const ad::Checkpoint& ck) {
  if (ck.meta.count("kind") == 0 || ck.meta_value("kind") != "victim") {
    throw ValidationError("checkpoint does not hold a victim model");
  }
  GnnArchitecture a;
  a.kind = parse_arch(ck.meta_value("arch"));
  a.layers = std::stoul(ck.meta_value("layers"));
  a.hidden = std::stoul(ck.meta_value("hidden"));
  a.power = std::stoul(ck.meta_value("power"));
  a.alpha = std::stod(ck.meta_value("alpha"));
  a.lambda = std::stod(ck.meta_value("lambda"));
  VictimModel m(a, std::stoul(ck.meta_value("num_features")), std::stoul(ck.meta_value("num_labels")), 0);
  for (auto& [n, t] : m.params_) {
    const Tensor& src = ck.get(n);
    if (src.rows() != t.rows() || src.cols() != t.cols()) {
      throw ValidationError("checkpoint tensor '" + n + "' has the wrong shape");
    }
    t = src.detach();
  }
  return m;
}

double accuracy(const VictimModel& m, std::span<const NodeId> nodes) {
  if (nodes.empty()) return 0.0;
  const auto pred = m.clean_predictions();
  std::size_t hit = 0;
  for (NodeId u : nodes) hit += pred[u] == m.graph().label(u) ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(nodes.size());
}

TrainedVictim train_victim(const Graph& g, const SplitSpec& split, const GnnArchitecture& arch, std::uint64_t seed,
                           const VictimTrainConfig& cfg) {
  validate_splits(split, g.num_nodes());
  VictimModel model(arch, g.num_features(), g.num_labels(), seed);
  const auto adj = std::make_shared<const SparseMatrix>(normalized_adjacency(g));
  const FeatureInput x{std::make_shared<const SparseMatrix>(g.feature_matrix()), {}};
  std::vector<std::size_t> rows(split.train.begin(), split.train.end());
  std::vector<std::uint32_t> labels;
  for (NodeId u : split.train) labels.push_back(g.label(u));

  ad::AdamConfig ac;
  ac.lr = cfg.lr;
  ac.weight_decay = cfg.weight_decay;
  ad::Adam opt(model.parameter_tensors(), ac);

  auto acc_of = [&](const Tensor& z, std::span<const NodeId> nodes) {
    std::size_t hit = 0;
    const std::size_t y = g.num_labels();
    for (NodeId u : nodes) hit += argmax(z.values().subspan(std::size_t(u) * y, y)) == g.label(u) ? 1 : 0;
    return nodes.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(nodes.size());
  };

  VictimTrainStats stats;
  double best_val = -1.0;
  std::vector<std::vector<double>> best;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    opt.zero_grad();
    const Tensor loss = ad::cross_entropy(model.logits(adj, x), rows, labels);
    if (!std::isfinite(loss.item())) {
      throw TrainingError("victim training diverged at epoch " + std::to_string(epoch));
    }
    ad::backward(loss);
    opt.step();
    stats.final_loss = loss.item();
    const Tensor z = model.logits(adj, x).detach();
    const double val = acc_of(z, split.val);
    if (val > best_val) {
      best_val = val;
      stats.best_epoch = epoch;
      best.clear();
      for (const auto& [n, t] : model.params()) best.emplace_back(t.values().begin(), t.values().end());
    }
    log::debug("victim epoch " + std::to_string(epoch) + " loss " + std::to_string(loss.item()) + " val " +
               std::to_string(val));
  }
  if (!best.empty()) {
    for (std::size_t i = 0; i < best.size(); ++i) {
      auto v = model.params()[i].second.mutable_values();
      std::copy(best[i].begin(), best[i].end(), v.begin());
    }
  }
  model.freeze();
  model.bind(g);
  stats.train_accuracy = accuracy(model, split.train);
  stats.val_accuracy = accuracy(model, split.val);
  stats.test_accuracy = accuracy(model, split.test);
  return {std::move(model), stats};
}

}  // namespace gnninject
