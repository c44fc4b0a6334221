#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace gnninject {

/// Compressed-sparse-row real matrix with sorted, unique column indices per row.
struct SparseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> offsets{0};
  std::vector<std::uint32_t> indices;
  std::vector<double> values;

  struct Triplet {
    std::uint32_t row;
    std::uint32_t col;
    double value;
  };

  std::size_t nnz() const { return indices.size(); }

  static SparseMatrix identity(std::size_t n);

  /// Duplicate (row, col) entries are summed.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets);

  SparseMatrix transposed() const;

  /// Row-major dense copy; intended for tests and small problems.
  std::vector<double> to_dense() const;

  double at(std::size_t r, std::size_t c) const;
};

/// out[rows x k] = S * dense[cols x k]. `out` is overwritten.
void spmm(const SparseMatrix& s, const double* dense, std::size_t k, double* out);

/// out[cols x k] += S^T * dense[rows x k].
void spmm_transposed_accumulate(const SparseMatrix& s, const double* dense, std::size_t k,
                                double* out);

}  // namespace gnninject
