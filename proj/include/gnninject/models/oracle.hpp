#pragma once

#include <atomic>
#include <cstdint>
#include <vector>

#include "gnninject/graph/injected_graph.hpp"
#include "gnninject/models/victim.hpp"

namespace gnninject {

/// Black-box access to a victim: probability rows of the target on an
/// injected graph, nothing else. Every call is counted.
class VictimOracle {
 public:
  virtual ~VictimOracle() = default;
  virtual std::size_t num_labels() const = 0;
  virtual ProbRow query_row(const InjectedGraph& ig) const = 0;
  /// Probability row of `u` on the unmodified graph (no injected node).
  virtual ProbRow clean_row(NodeId u) const = 0;
  /// Argmax label of every node on the unmodified graph.
  virtual std::vector<LabelId> clean_predictions() const = 0;

  double query_target_prob(const InjectedGraph& ig, LabelId y) const { return query_row(ig)[y]; }
  std::uint64_t queries() const { return queries_.load(std::memory_order_relaxed); }
  void reset_queries() { queries_.store(0, std::memory_order_relaxed); }

 protected:
  void count_query() const { queries_.fetch_add(1, std::memory_order_relaxed); }

 private:
  mutable std::atomic<std::uint64_t> queries_{0};
};

class ModelOracle final : public VictimOracle {
 public:
  /// `model` must be bound and outlive the oracle.
  explicit ModelOracle(const VictimModel& model) : model_(&model) {}

  std::size_t num_labels() const override { return model_->num_labels(); }
  ProbRow query_row(const InjectedGraph& ig) const override {
    count_query();
    return model_->query_row(ig);
  }
  ProbRow clean_row(NodeId u) const override {
    count_query();
    return model_->clean_row(u);
  }
  std::vector<LabelId> clean_predictions() const override {
    count_query();
    return model_->clean_predictions();
  }

 private:
  const VictimModel* model_;
};

}  // namespace gnninject
