#pragma once

#include "disamgnn/matrix.hpp"

#include <vector>

namespace disamgnn {

/// Compressed sparse row matrix with real values.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  /// Validates the CSR structure; throws std::invalid_argument otherwise.
  SparseMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> offsets,
               std::vector<std::size_t> indices, std::vector<double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }
  const std::vector<std::size_t>& offsets() const { return offsets_; }
  const std::vector<std::size_t>& indices() const { return indices_; }
  const std::vector<double>& values() const { return values_; }

  /// this * x
  Matrix multiply(const Matrix& x) const;
  /// this^T * x
  Matrix transpose_multiply(const Matrix& x) const;
  Matrix to_dense() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::size_t> indices_;
  std::vector<double> values_;
};

}  // namespace disamgnn
