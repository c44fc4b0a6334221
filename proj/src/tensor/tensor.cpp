#include "gnninject/tensor/tensor.hpp"

#include <algorithm>
#include <string>
#include <unordered_set>

#include "gnninject/core/errors.hpp"

namespace gnninject::ad {

thread_local bool NoGradGuard::enabled_ = true;

Tensor::Tensor(std::size_t rows, std::size_t cols, bool requires_grad)
    : Tensor(rows, cols, std::vector<double>(rows * cols, 0.0), requires_grad) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values, bool requires_grad)
    : node_(std::make_shared<detail::Node>()) {
  if (values.size() != rows * cols) {
    throw DimensionError("tensor " + std::to_string(rows) + "x" + std::to_string(cols) + " given " +
                         std::to_string(values.size()) + " values");
  }
  node_->rows = rows;
  node_->cols = cols;
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double v, bool requires_grad) { return Tensor(1, 1, {v}, requires_grad); }

double Tensor::item() const {
  if (size() != 1) {
    throw UsageError("item() on a " + std::to_string(rows()) + "x" + std::to_string(cols()) + " tensor");
  }
  return node_->value[0];
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return Tensor(rows(), cols(), node_->value, false); }

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.rows() != 1 || loss.cols() != 1) {
    throw UsageError("backward() requires a 1x1 loss");
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order of the tape.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Non-leaf gradients are scratch space for this pass.
  for (auto* n : order) {
    if (n->backward) n->grad.assign(n->value.size(), 0.0);
  }
  loss.node()->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

}  // namespace gnninject::ad
