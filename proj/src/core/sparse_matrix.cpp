#include "gnninject/core/sparse_matrix.hpp"

#include <algorithm>
#include <string>

#include "gnninject/core/errors.hpp"
#include "gnninject/core/kernels.hpp"

namespace gnninject {

SparseMatrix SparseMatrix::identity(std::size_t n) {
  SparseMatrix m;
  m.rows = m.cols = n;
  m.offsets.resize(n + 1);
  m.indices.resize(n);
  m.values.assign(n, 1.0);
  for (std::size_t i = 0; i <= n; ++i) m.offsets[i] = i;
  for (std::size_t i = 0; i < n; ++i) m.indices[i] = static_cast<std::uint32_t>(i);
  return m;
}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                         std::vector<Triplet> triplets) {
  for (const auto& t : triplets) {
    if (t.row >= rows || t.col >= cols) {
      throw DimensionError("triplet (" + std::to_string(t.row) + ", " + std::to_string(t.col) +
                           ") outside " + std::to_string(rows) + "x" + std::to_string(cols));
    }
  }
  std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  SparseMatrix m;
  m.rows = rows;
  m.cols = cols;
  m.offsets.assign(rows + 1, 0);
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    const auto& t = triplets[i];
    if (!m.indices.empty() && i > 0 && triplets[i - 1].row == t.row && triplets[i - 1].col == t.col) {
      m.values.back() += t.value;
      continue;
    }
    m.indices.push_back(t.col);
    m.values.push_back(t.value);
    ++m.offsets[t.row + 1];
  }
  for (std::size_t r = 0; r < rows; ++r) m.offsets[r + 1] += m.offsets[r];
  return m;
}

SparseMatrix SparseMatrix::transposed() const {
  SparseMatrix t;
  t.rows = cols;
  t.cols = rows;
  t.offsets.assign(cols + 1, 0);
  for (auto c : indices) ++t.offsets[c + 1];
  for (std::size_t c = 0; c < cols; ++c) t.offsets[c + 1] += t.offsets[c];
  t.indices.resize(nnz());
  t.values.resize(nnz());
  std::vector<std::size_t> cursor(t.offsets.begin(), t.offsets.end() - 1);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t p = offsets[r]; p < offsets[r + 1]; ++p) {
      const auto dst = cursor[indices[p]]++;
      t.indices[dst] = static_cast<std::uint32_t>(r);
      t.values[dst] = values[p];
    }
  }
  return t;
}

std::vector<double> SparseMatrix::to_dense() const {
  std::vector<double> d(rows * cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t p = offsets[r]; p < offsets[r + 1]; ++p) d[r * cols + indices[p]] = values[p];
  }
  return d;
}

double SparseMatrix::at(std::size_t r, std::size_t c) const {
  const auto first = indices.begin() + static_cast<std::ptrdiff_t>(offsets[r]);
  const auto last = indices.begin() + static_cast<std::ptrdiff_t>(offsets[r + 1]);
  const auto it = std::lower_bound(first, last, static_cast<std::uint32_t>(c));
  if (it == last || *it != c) return 0.0;
  return values[static_cast<std::size_t>(it - indices.begin())];
}

void spmm(const SparseMatrix& s, const double* dense, std::size_t k, double* out) {
  const auto& kern = simd::active();
  std::fill(out, out + s.rows * k, 0.0);
  for (std::size_t r = 0; r < s.rows; ++r) {
    double* dst = out + r * k;
    for (std::size_t p = s.offsets[r]; p < s.offsets[r + 1]; ++p) {
      kern.axpy(s.values[p], dense + static_cast<std::size_t>(s.indices[p]) * k, dst, k);
    }
  }
}

void spmm_transposed_accumulate(const SparseMatrix& s, const double* dense, std::size_t k,
                                double* out) {
  const auto& kern = simd::active();
  for (std::size_t r = 0; r < s.rows; ++r) {
    const double* src = dense + r * k;
    for (std::size_t p = s.offsets[r]; p < s.offsets[r + 1]; ++p) {
      kern.axpy(s.values[p], src, out + static_cast<std::size_t>(s.indices[p]) * k, k);
    }
  }
}

}  // namespace gnninject
