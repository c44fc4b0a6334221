#include "gnninject/agent/networks.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "gnninject/core/errors.hpp"
#include "gnninject/tensor/ops.hpp"

namespace gnninject {

std::vector<double> orthogonal_init(std::size_t rows, std::size_t cols, double gain, Rng& rng) {
  const std::size_t big = std::max(rows, cols), small = std::min(rows, cols);
  Eigen::MatrixXd a(big, small);
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, j) = standard_normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
  const Eigen::MatrixXd r = qr.matrixQR().topLeftCorner(small, small);
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  std::vector<double> out(rows * cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] = gain * (rows >= cols ? q(i, j) : q(j, i));
  return out;
}

Mlp::Mlp(std::vector<std::size_t> dims, double hidden_gain, double output_gain, Rng& rng) : dims_(std::move(dims)) {
  if (dims_.size() < 2) throw ValidationError("an MLP needs at least input and output sizes");
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    const bool last = l + 2 == dims_.size();
    const std::size_t in = dims_[l], out = dims_[l + 1];
    params_.emplace_back("W" + std::to_string(l + 1),
                         ad::Tensor(in, out, orthogonal_init(in, out, last ? output_gain : hidden_gain, rng), true));
    params_.emplace_back("b" + std::to_string(l + 1), ad::Tensor(1, out, true));
  }
}

ad::Tensor Mlp::forward(const ad::Tensor& x) const {
  ad::Tensor h = x;
  for (std::size_t l = 0; l < layers(); ++l) {
    h = ad::add_row_bias(ad::matmul(h, params_[2 * l].second), params_[2 * l + 1].second);
    if (l + 1 < layers()) h = ad::tanh(h);
  }
  return h;
}

Mlp Mlp::clone() const {
  Mlp m;
  m.dims_ = dims_;
  for (const auto& [n, t] : params_) {
    m.params_.emplace_back(n, ad::Tensor(t.rows(), t.cols(), std::vector<double>(t.values().begin(), t.values().end()),
                                         t.requires_grad()));
  }
  return m;
}

namespace {

std::vector<std::size_t> mlp_dims(std::size_t in, std::size_t hidden, std::size_t layers, std::size_t out) {
  if (layers == 0) throw ValidationError("network needs at least one layer");
  std::vector<std::size_t> d{in};
  for (std::size_t i = 1; i < layers; ++i) d.push_back(hidden);
  d.push_back(out);
  return d;
}

}  // namespace

Agent::Agent(const AgentShape& shape, std::uint64_t seed) : shape_(shape) {
  if (shape.num_features == 0 || shape.hidden == 0) throw ValidationError("agent needs F >= 1 and hidden >= 1");
  const double hidden_gain = std::sqrt(2.0);
  Rng pr = derive_rng(seed, "policy-init");
  policy_ = Mlp(mlp_dims(2 * shape.num_features, shape.hidden, shape.policy_layers, shape.num_features), hidden_gain,
                0.01, pr);
  Rng vr = derive_rng(seed, "value-init");
  value_ = Mlp(mlp_dims(2 * shape.num_features, shape.hidden, shape.value_layers, 1), hidden_gain, 1.0, vr);
}

std::vector<ad::Tensor> Agent::parameter_tensors() const {
  std::vector<ad::Tensor> out;
  for (const auto& [n, t] : policy_.params()) out.push_back(t);
  for (const auto& [n, t] : value_.params()) out.push_back(t);
  return out;
}

Agent Agent::clone() const {
  Agent a;
  a.shape_ = shape_;
  a.policy_ = policy_.clone();
  a.value_ = value_.clone();
  return a;
}

ad::Checkpoint Agent::to_checkpoint() const {
  ad::Checkpoint ck;
  ck.meta["kind"] = "agent";
  ck.meta["num_features"] = std::to_string(shape_.num_features);
  ck.meta["hidden"] = std::to_string(shape_.hidden);
  ck.meta["policy_layers"] = std::to_string(shape_.policy_layers);
  ck.meta["value_layers"] = std::to_string(shape_.value_layers);
  for (const auto& [n, t] : policy_.params()) ck.add("policy." + n, t);
  for (const auto& [n, t] : value_.params()) ck.add("value." + n, t);
  return ck;
}

Agent Agent::from_checkpoint(const ad::Checkpoint& ck) {
  if (ck.meta.count("kind") == 0 || ck.meta_value("kind") != "agent") {
    throw ValidationError("checkpoint does not hold an agent");
  }
  AgentShape s;
  s.num_features = std::stoul(ck.meta_value("num_features"));
  s.hidden = std::stoul(ck.meta_value("hidden"));
  s.policy_layers = std::stoul(ck.meta_value("policy_layers"));
  s.value_layers = std::stoul(ck.meta_value("value_layers"));
  Agent a(s, 0);
  for (auto& [n, t] : a.policy_.params()) ad::assign_values(t, ck.get("policy." + n));
  for (auto& [n, t] : a.value_.params()) ad::assign_values(t, ck.get("value." + n));
  return a;
}

std::vector<double> policy_distribution(std::span<const double> logits, std::span<const std::uint8_t> mask) {
  if (logits.size() != mask.size()) throw DimensionError("policy_distribution: logits and mask lengths differ");
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (mask[i]) mx = std::max(mx, logits[i]);
  }
  if (mx == -std::numeric_limits<double>::infinity()) throw DomainError("policy_distribution: every action is masked");
  std::vector<double> p(logits.size(), 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (mask[i]) z += (p[i] = std::exp(logits[i] - mx));
  }
  for (double& v : p) v /= z;
  return p;
}

std::size_t sample_from_log_probs(std::span<const double> log_probs, Rng& rng) {
  std::size_t best = log_probs.size();
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < log_probs.size(); ++i) {
    if (log_probs[i] == -std::numeric_limits<double>::infinity()) continue;
    const double s = log_probs[i] + standard_gumbel(rng);
    if (best == log_probs.size() || s > best_score) {
      best = i;
      best_score = s;
    }
  }
  if (best == log_probs.size()) throw DomainError("sample_action: no action has positive probability");
  return best;
}

std::size_t sample_action(std::span<const double> probs, Rng& rng) {
  std::vector<double> lp(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    lp[i] = probs[i] > 0.0 ? std::log(probs[i]) : -std::numeric_limits<double>::infinity();
  }
  return sample_from_log_probs(lp, rng);
}

std::size_t greedy_action(std::span<const double> probs) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return best;
}

}  // namespace gnninject
