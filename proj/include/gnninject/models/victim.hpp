#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gnninject/core/sparse_matrix.hpp"
#include "gnninject/graph/graph.hpp"
#include "gnninject/graph/injected_graph.hpp"
#include "gnninject/graph/splits.hpp"
#include "gnninject/models/architecture.hpp"
#include "gnninject/tensor/checkpoint.hpp"
#include "gnninject/tensor/tensor.hpp"

namespace gnninject {

/// Per-label probabilities of one node.
using ProbRow = std::vector<double>;

/// Node features for a forward pass: the rows of a constant sparse matrix,
/// optionally followed by dense rows that may carry gradients.
struct FeatureInput {
  std::shared_ptr<const SparseMatrix> sparse;
  ad::Tensor dense_tail;

  std::size_t rows() const { return sparse->rows + (dense_tail.defined() ? dense_tail.rows() : 0); }
};

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> v);

/// Trained (or freshly initialised) classifier. After bind() it caches the
/// normalized adjacency, features, clean-graph probabilities and the
/// first-layer projection of one graph; every query method is const and
/// safe to call concurrently.
class VictimModel {
 public:
  VictimModel() = default;
  /// Glorot-uniform initialisation from `seed`.
  VictimModel(const GnnArchitecture& arch, std::size_t num_features, std::size_t num_labels, std::uint64_t seed);

  const GnnArchitecture& arch() const { return arch_; }
  std::size_t num_features() const { return num_features_; }
  std::size_t num_labels() const { return num_labels_; }

  std::vector<std::pair<std::string, ad::Tensor>>& params() { return params_; }
  const std::vector<std::pair<std::string, ad::Tensor>>& params() const { return params_; }
  std::vector<ad::Tensor> parameter_tensors() const;
  const ad::Tensor& param(const std::string& name) const;

  /// Raw scores for every row of `x` propagated with `adj`.
  ad::Tensor logits(const std::shared_ptr<const SparseMatrix>& adj, const FeatureInput& x) const;

  /// Replaces parameters with gradient-free copies and rebuilds caches.
  void freeze();

  void bind(const Graph& g);
  bool is_bound() const { return cache_ != nullptr; }
  /// Throws UsageError when unbound.
  const Graph& graph() const;

  /// Row-major N x Y probabilities on the unmodified bound graph.
  std::span<const double> clean_probs() const;
  ProbRow clean_row(NodeId u) const;
  std::vector<LabelId> clean_predictions() const;

  /// Probability row of the target in the injected graph. Uses the exact
  /// local 2-hop evaluator when the architecture allows it.
  ProbRow query_row(const InjectedGraph& ig) const;
  double query_target_prob(const InjectedGraph& ig, LabelId y) const { return query_row(ig)[y]; }

  /// Full forward over all N+1 rows of the injected graph (N+1) x Y.
  std::vector<double> injected_probs_full(const InjectedGraph& ig) const;
  ProbRow query_row_full(const InjectedGraph& ig) const;

  /// d Ẑ[target, y] / d x̂ with the injected row treated as continuous.
  std::vector<double> feature_gradient(const InjectedGraph& ig, LabelId y) const;
  /// Same quantity through the tape over the full injected graph.
  std::vector<double> feature_gradient_autodiff(const InjectedGraph& ig, LabelId y) const;

  ad::Checkpoint to_checkpoint() const;
  /// Unbound model; call bind() before querying.
  static VictimModel from_checkpoint(const ad::Checkpoint& ck);

 private:
  struct Cache;

  ad::Tensor first_projection(const FeatureInput& x, const ad::Tensor& w) const;
  const Cache& cache_for(const InjectedGraph& ig) const;
  ProbRow local_row(const InjectedGraph& ig) const;

  GnnArchitecture arch_;
  std::size_t num_features_ = 0;
  std::size_t num_labels_ = 0;
  std::vector<std::pair<std::string, ad::Tensor>> params_;
  std::shared_ptr<const Cache> cache_;
};

struct VictimTrainConfig {
  std::size_t epochs = 300;
  double lr = 0.01;
  double weight_decay = 5e-4;
};

struct VictimTrainStats {
  std::size_t best_epoch = 0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  double test_accuracy = 0.0;
  double final_loss = 0.0;
};

struct TrainedVictim {
  VictimModel model;
  VictimTrainStats stats;
};

/// Full-batch cross-entropy training on split.train; keeps the epoch with the
/// best validation accuracy (earliest on ties). The returned model is frozen
/// and bound to `g`. Throws TrainingError on a non-finite loss.
TrainedVictim train_victim(const Graph& g, const SplitSpec& split, const GnnArchitecture& arch, std::uint64_t seed,
                           const VictimTrainConfig& cfg = {});

/// Fraction of `nodes` whose clean prediction equals the true label.
double accuracy(const VictimModel& m, std::span<const NodeId> nodes);

}  // namespace gnninject
