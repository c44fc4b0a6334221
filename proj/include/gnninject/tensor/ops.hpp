#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "gnninject/core/sparse_matrix.hpp"
#include "gnninject/tensor/tensor.hpp"

namespace gnninject::ad {

// Every op records a backward closure only when some input requires grad, so
// the same calls serve as a tape-free inference path.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

/// a[r x c] + bias[1 x c] broadcast over rows.
Tensor add_row_bias(const Tensor& a, const Tensor& bias);

/// Row-wise concatenation: [r x ca] ++ [r x cb] -> [r x (ca + cb)].
Tensor concat_rows(const Tensor& a, const Tensor& b);

/// Vertical stacking: [ra x c] over [rb x c] -> [(ra + rb) x c].
Tensor stack_rows(const Tensor& a, const Tensor& b);

Tensor select_rows(const Tensor& a, std::span<const std::size_t> rows);

/// S * dense. The sparse operand is a constant; gradients flow to `dense` only.
Tensor spmm(std::shared_ptr<const SparseMatrix> s, const Tensor& dense);

Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
/// Throws DomainError on a non-positive entry.
Tensor log(const Tensor& a);
Tensor square(const Tensor& a);

Tensor softmax_rows(const Tensor& a);
Tensor log_softmax_rows(const Tensor& a);

/// Log-softmax restricted to entries with mask != 0; masked entries become
/// -inf and receive no gradient. Throws DomainError on an all-zero mask row.
/// `mask` is row-major with the same shape as `logits`.
Tensor masked_log_softmax_rows(const Tensor& logits, std::span<const std::uint8_t> mask);

/// Per row, sum over finite entries of exp(l) * l (the negative entropy when
/// `log_probs` holds log-probabilities). Output [r x 1].
Tensor plogp_rows(const Tensor& log_probs);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// out[r] = a[r, cols[r]], shape [r x 1].
Tensor pick(const Tensor& a, std::span<const std::size_t> cols);

/// Elementwise clamp to [lo, hi]; zero gradient where the clamp is active.
Tensor clip(const Tensor& a, double lo, double hi);
Tensor minimum(const Tensor& a, const Tensor& b);

/// Elementwise Huber loss with unit transition: x^2/2 for |x| < 1, |x| - 1/2 otherwise.
Tensor huber(const Tensor& a);

/// Mean over `rows` of -log softmax(logits)[row, labels[i]].
Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> rows,
                     std::span<const std::uint32_t> labels);

}  // namespace gnninject::ad
