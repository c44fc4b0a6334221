#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gnninject/core/rng.hpp"
#include "gnninject/tensor/checkpoint.hpp"
#include "gnninject/tensor/tensor.hpp"

namespace gnninject {

/// Row-major rows x cols matrix with orthonormal rows or columns (whichever
/// is fewer), scaled by `gain`. QR of a Gaussian matrix with the sign of
/// R's diagonal folded into Q.
std::vector<double> orthogonal_init(std::size_t rows, std::size_t cols, double gain, Rng& rng);

/// Fully connected network, tanh between layers, linear output.
/// dims = {in, hidden..., out}; layer l has weight "W<l>" and bias "b<l>".
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<std::size_t> dims, double hidden_gain, double output_gain, Rng& rng);

  ad::Tensor forward(const ad::Tensor& x) const;

  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t layers() const { return dims_.size() - 1; }
  std::vector<std::pair<std::string, ad::Tensor>>& params() { return params_; }
  const std::vector<std::pair<std::string, ad::Tensor>>& params() const { return params_; }

  /// Independent value copy (no shared storage).
  Mlp clone() const;

 private:
  std::vector<std::size_t> dims_;
  std::vector<std::pair<std::string, ad::Tensor>> params_;
};

struct AgentShape {
  std::size_t num_features = 0;
  std::size_t hidden = 512;
  std::size_t policy_layers = 6;
  std::size_t value_layers = 4;
};

/// Policy and value networks over the length-2F state embedding. The policy
/// emits F raw logits; the value head emits one scalar.
class Agent {
 public:
  Agent() = default;
  Agent(const AgentShape& shape, std::uint64_t seed);

  const AgentShape& shape() const { return shape_; }
  ad::Tensor policy_logits(const ad::Tensor& states) const { return policy_.forward(states); }
  ad::Tensor values(const ad::Tensor& states) const { return value_.forward(states); }

  std::vector<ad::Tensor> parameter_tensors() const;
  Agent clone() const;

  ad::Checkpoint to_checkpoint() const;
  static Agent from_checkpoint(const ad::Checkpoint& ck);

 private:
  AgentShape shape_;
  Mlp policy_;
  Mlp value_;
};

/// softmax over the unmasked logits; masked entries are exactly zero.
/// Throws DomainError when no entry is selectable.
std::vector<double> policy_distribution(std::span<const double> logits, std::span<const std::uint8_t> mask);

/// Gumbel-max draw: argmax over entries with p > 0 of ln p + Gumbel noise.
std::size_t sample_action(std::span<const double> probs, Rng& rng);
/// Same draw from log-probabilities; -inf entries are never chosen.
std::size_t sample_from_log_probs(std::span<const double> log_probs, Rng& rng);
/// argmax, ties to the lowest index.
std::size_t greedy_action(std::span<const double> probs);

}  // namespace gnninject
