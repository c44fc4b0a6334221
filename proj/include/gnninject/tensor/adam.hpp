#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gnninject/tensor/tensor.hpp"

namespace gnninject::ad {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// L2 penalty folded into the gradient before the moment update.
  double weight_decay = 0.0;
  /// 0 keeps lr constant; otherwise lr * max(0, 1 - step / decay_steps).
  std::uint64_t decay_steps = 0;

  static AdamConfig linear_decay(double lr, std::uint64_t total_steps) {
    AdamConfig c;
    c.lr = lr;
    c.decay_steps = total_steps;
    return c;
  }
};

class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig config);

  /// Learning rate applied by the next step().
  double current_lr() const;
  std::uint64_t steps() const { return step_; }

  /// Parameters with an empty gradient are skipped.
  void step();
  void zero_grad();

  const std::vector<Tensor>& params() const { return params_; }
  const AdamConfig& config() const { return config_; }

 private:
  std::vector<Tensor> params_;
  AdamConfig config_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::uint64_t step_ = 0;
};

/// Rescales all gradients so their joint L2 norm is at most max_norm.
/// Returns the norm before rescaling.
double clip_grad_norm(std::span<Tensor> params, double max_norm);

}  // namespace gnninject::ad
