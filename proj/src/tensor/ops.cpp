#include "gnninject/tensor/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gnninject/core/errors.hpp"
#include "gnninject/core/kernels.hpp"

namespace gnninject::ad {
namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

std::string shape(const Tensor& t) { return std::to_string(t.rows()) + "x" + std::to_string(t.cols()); }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape(a) + " vs " + shape(b));
  }
}

Tensor make_result(std::size_t rows, std::size_t cols, std::vector<double> value,
                   std::vector<NodePtr> parents, std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->rows = rows;
  node->cols = cols;
  node->value = std::move(value);
  node->requires_grad = NoGradGuard::grad_enabled() && std::any_of(parents.begin(), parents.end(),
                                    [](const NodePtr& p) { return p->requires_grad; });
  if (node->requires_grad) {
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

std::vector<double> transpose(const std::vector<double>& v, std::size_t rows, std::size_t cols) {
  std::vector<double> t(v.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) t[c * rows + r] = v[r * cols + c];
  }
  return t;
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& a, Fwd fwd, Deriv deriv) {
  std::vector<double> out(a.size());
  const auto in = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(in[i]);
  return make_result(a.rows(), a.cols(), std::move(out), {a.node()}, [deriv](Node& self) {
    Node& p = *self.parents[0];
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * deriv(p.value[i], self.value[i]);
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) throw DimensionError("matmul: " + shape(a) + " * " + shape(b));
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n, 0.0);
  simd::active().gemm(m, n, k, a.values().data(), k, b.values().data(), n, out.data(), n);
  return make_result(m, n, std::move(out), {a.node(), b.node()}, [m, k, n](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const auto& kern = simd::active();
    if (pa.requires_grad) {
      // dA += dC * B^T
      const auto bt = transpose(pb.value, k, n);
      kern.gemm(m, k, n, self.grad.data(), n, bt.data(), k, pa.ensure_grad().data(), k);
    }
    if (pb.requires_grad) {
      // dB += A^T * dC
      const auto at = transpose(pa.value, m, k);
      kern.gemm(k, n, m, at.data(), m, self.grad.data(), n, pb.ensure_grad().data(), n);
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.values().begin(), a.values().end());
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return make_result(a.rows(), a.cols(), std::move(out), {a.node(), b.node()}, [](Node& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      auto& g = p->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.values().begin(), a.values().end());
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return make_result(a.rows(), a.cols(), std::move(out), {a.node(), b.node()}, [](Node& self) {
    if (self.parents[0]->requires_grad) {
      auto& g = self.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (self.parents[1]->requires_grad) {
      auto& g = self.parents[1]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "hadamard");
  std::vector<double> out(a.size());
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_result(a.rows(), a.cols(), std::move(out), {a.node(), b.node()}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.value[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_row_bias(const Tensor& a, const Tensor& bias) {
  if (bias.rows() != 1 || bias.cols() != a.cols()) {
    throw DimensionError("add_row_bias: " + shape(a) + " + bias " + shape(bias));
  }
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(a.values().begin(), a.values().end());
  const auto bv = bias.values();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += bv[j];
  }
  return make_result(r, c, std::move(out), {a.node(), bias.node()}, [r, c](Node& self) {
    if (self.parents[0]->requires_grad) {
      auto& g = self.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (self.parents[1]->requires_grad) {
      auto& g = self.parents[1]->ensure_grad();
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) g[j] += self.grad[i * c + j];
      }
    }
  });
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) throw DimensionError("concat_rows: " + shape(a) + " ++ " + shape(b));
  const std::size_t r = a.rows(), ca = a.cols(), cb = b.cols(), c = ca + cb;
  std::vector<double> out(r * c);
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < r; ++i) {
    std::copy_n(av.data() + i * ca, ca, out.data() + i * c);
    std::copy_n(bv.data() + i * cb, cb, out.data() + i * c + ca);
  }
  return make_result(r, c, std::move(out), {a.node(), b.node()}, [r, ca, cb, c](Node& self) {
    if (self.parents[0]->requires_grad) {
      auto& g = self.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < ca; ++j) g[i * ca + j] += self.grad[i * c + j];
      }
    }
    if (self.parents[1]->requires_grad) {
      auto& g = self.parents[1]->ensure_grad();
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < cb; ++j) g[i * cb + j] += self.grad[i * c + ca + j];
      }
    }
  });
}

Tensor stack_rows(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) throw DimensionError("stack_rows: " + shape(a) + " over " + shape(b));
  std::vector<double> out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.values().begin(), a.values().end());
  out.insert(out.end(), b.values().begin(), b.values().end());
  const std::size_t na = a.size();
  return make_result(a.rows() + b.rows(), a.cols(), std::move(out), {a.node(), b.node()},
                     [na](Node& self) {
                       if (self.parents[0]->requires_grad) {
                         auto& g = self.parents[0]->ensure_grad();
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                       }
                       if (self.parents[1]->requires_grad) {
                         auto& g = self.parents[1]->ensure_grad();
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[na + i];
                       }
                     });
}

Tensor select_rows(const Tensor& a, std::span<const std::size_t> rows) {
  const std::size_t c = a.cols();
  std::vector<double> out(rows.size() * c);
  const auto av = a.values();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= a.rows()) throw DimensionError("select_rows: row " + std::to_string(rows[i]) + " of " + shape(a));
    std::copy_n(av.data() + rows[i] * c, c, out.data() + i * c);
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return make_result(rows.size(), c, std::move(out), {a.node()}, [idx = std::move(idx), c](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t j = 0; j < c; ++j) g[idx[i] * c + j] += self.grad[i * c + j];
    }
  });
}

Tensor spmm(std::shared_ptr<const SparseMatrix> s, const Tensor& dense) {
  if (s->cols != dense.rows()) {
    throw DimensionError("spmm: sparse " + std::to_string(s->rows) + "x" + std::to_string(s->cols) +
                         " * " + shape(dense));
  }
  const std::size_t k = dense.cols();
  const std::size_t rows = s->rows;
  std::vector<double> out(rows * k);
  gnninject::spmm(*s, dense.values().data(), k, out.data());
  return make_result(rows, k, std::move(out), {dense.node()}, [s = std::move(s), k](Node& self) {
    spmm_transposed_accumulate(*s, self.grad.data(), k, self.parents[0]->ensure_grad().data());
  });
}

Tensor tanh(const Tensor& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  for (double v : a.values()) {
    if (!(v > 0.0)) throw DomainError("log of non-positive value " + std::to_string(v));
  }
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor square(const Tensor& a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor softmax_rows(const Tensor& a) {
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(a.size());
  const auto av = a.values();
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = av.data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += (out[i * c + j] = std::exp(row[j] - mx));
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= z;
  }
  return make_result(r, c, std::move(out), {a.node()}, [r, c](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < r; ++i) {
      const double* y = self.value.data() + i * c;
      const double* gy = self.grad.data() + i * c;
      double dotp = 0.0;
      for (std::size_t j = 0; j < c; ++j) dotp += gy[j] * y[j];
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += y[j] * (gy[j] - dotp);
    }
  });
}

Tensor log_softmax_rows(const Tensor& a) {
  std::vector<std::uint8_t> all(a.size(), 1);
  return masked_log_softmax_rows(a, all);
}

Tensor masked_log_softmax_rows(const Tensor& logits, std::span<const std::uint8_t> mask) {
  const std::size_t r = logits.rows(), c = logits.cols();
  if (mask.size() != logits.size()) {
    throw DimensionError("masked_log_softmax_rows: mask of " + std::to_string(mask.size()) + " for " + shape(logits));
  }
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  std::vector<double> out(logits.size(), kNegInf);
  const auto lv = logits.values();
  for (std::size_t i = 0; i < r; ++i) {
    double mx = kNegInf;
    for (std::size_t j = 0; j < c; ++j) {
      if (mask[i * c + j]) mx = std::max(mx, lv[i * c + j]);
    }
    if (mx == kNegInf) throw DomainError("masked_log_softmax_rows: row " + std::to_string(i) + " is fully masked");
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      if (mask[i * c + j]) z += std::exp(lv[i * c + j] - mx);
    }
    const double lz = mx + std::log(z);
    for (std::size_t j = 0; j < c; ++j) {
      if (mask[i * c + j]) out[i * c + j] = lv[i * c + j] - lz;
    }
  }
  std::vector<std::uint8_t> m(mask.begin(), mask.end());
  return make_result(r, c, std::move(out), {logits.node()}, [r, c, m = std::move(m)](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < r; ++i) {
      double gsum = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        if (m[i * c + j]) gsum += self.grad[i * c + j];
      }
      for (std::size_t j = 0; j < c; ++j) {
        if (m[i * c + j]) g[i * c + j] += self.grad[i * c + j] - std::exp(self.value[i * c + j]) * gsum;
      }
    }
  });
}

Tensor plogp_rows(const Tensor& log_probs) {
  const std::size_t r = log_probs.rows(), c = log_probs.cols();
  std::vector<double> out(r, 0.0);
  const auto lv = log_probs.values();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      const double l = lv[i * c + j];
      if (std::isfinite(l)) out[i] += std::exp(l) * l;
    }
  }
  return make_result(r, 1, std::move(out), {log_probs.node()}, [r, c](Node& self) {
    Node& p = *self.parents[0];
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) {
        const double l = p.value[i * c + j];
        if (std::isfinite(l)) g[i * c + j] += self.grad[i] * std::exp(l) * (l + 1.0);
      }
    }
  });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return make_result(1, 1, {s}, {a.node()}, [](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (auto& x : g) x += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw DimensionError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor pick(const Tensor& a, std::span<const std::size_t> cols) {
  const std::size_t r = a.rows(), c = a.cols();
  if (cols.size() != r) throw DimensionError("pick: " + std::to_string(cols.size()) + " indices for " + shape(a));
  std::vector<double> out(r);
  for (std::size_t i = 0; i < r; ++i) {
    if (cols[i] >= c) throw DimensionError("pick: column " + std::to_string(cols[i]) + " of " + shape(a));
    out[i] = a(i, cols[i]);
  }
  std::vector<std::size_t> idx(cols.begin(), cols.end());
  return make_result(r, 1, std::move(out), {a.node()}, [idx = std::move(idx), c](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < idx.size(); ++i) g[i * c + idx[i]] += self.grad[i];
  });
}

Tensor clip(const Tensor& a, double lo, double hi) {
  return unary(
      a, [lo, hi](double x) { return x < lo ? lo : (x > hi ? hi : x); },
      [lo, hi](double x, double) { return (x < lo || x > hi) ? 0.0 : 1.0; });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "minimum");
  std::vector<double> out(a.size());
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(av[i], bv[i]);
  return make_result(a.rows(), a.cols(), std::move(out), {a.node(), b.node()}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    // Ties route the gradient to the first argument.
    for (std::size_t i = 0; i < self.value.size(); ++i) {
      const bool first = pa.value[i] <= pb.value[i];
      if (first && pa.requires_grad) pa.ensure_grad()[i] += self.grad[i];
      if (!first && pb.requires_grad) pb.ensure_grad()[i] += self.grad[i];
    }
  });
}

Tensor huber(const Tensor& a) {
  return unary(
      a, [](double x) { return std::abs(x) < 1.0 ? 0.5 * x * x : std::abs(x) - 0.5; },
      [](double x, double) { return std::abs(x) < 1.0 ? x : (x > 0.0 ? 1.0 : -1.0); });
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> rows,
                     std::span<const std::uint32_t> labels) {
  if (rows.size() != labels.size() || rows.empty()) {
    throw DimensionError("cross_entropy: " + std::to_string(rows.size()) + " rows vs " +
                         std::to_string(labels.size()) + " labels");
  }
  const Tensor lp = log_softmax_rows(select_rows(logits, rows));
  std::vector<std::size_t> cols(labels.begin(), labels.end());
  return scale(mean(pick(lp, cols)), -1.0);
}

}  // namespace gnninject::ad
