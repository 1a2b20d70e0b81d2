#include "disamgnn/sparse.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace disamgnn {

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> offsets,
                           std::vector<std::size_t> indices, std::vector<double> values)
    : rows_(rows), cols_(cols), offsets_(std::move(offsets)), indices_(std::move(indices)),
      values_(std::move(values)) {
  if (offsets_.size() != rows_ + 1 || offsets_.front() != 0) {
    throw std::invalid_argument("CSR offsets must have rows+1 entries starting at 0");
  }
  if (indices_.size() != values_.size() || offsets_.back() != values_.size()) {
    throw std::invalid_argument("CSR offsets/indices/values lengths disagree");
  }
  for (std::size_t r = 0; r < rows_; ++r) {
    if (offsets_[r] > offsets_[r + 1]) throw std::invalid_argument("CSR offsets decrease");
  }
  for (std::size_t k = 0; k < indices_.size(); ++k) {
    if (indices_[k] >= cols_) {
      throw std::invalid_argument("CSR column index " + std::to_string(indices_[k]) +
                                  " out of range");
    }
    if (!std::isfinite(values_[k])) throw std::invalid_argument("CSR value is not finite");
  }
}

Matrix SparseMatrix::multiply(const Matrix& x) const {
  if (static_cast<std::size_t>(x.rows()) != cols_) {
    throw std::invalid_argument("spmm shape mismatch");
  }
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(rows_), x.cols());
  for (std::size_t r = 0; r < rows_; ++r) {
    auto dst = out.row(static_cast<Eigen::Index>(r));
    for (std::size_t k = offsets_[r]; k < offsets_[r + 1]; ++k) {
      dst += values_[k] * x.row(static_cast<Eigen::Index>(indices_[k]));
    }
  }
  return out;
}

Matrix SparseMatrix::transpose_multiply(const Matrix& x) const {
  if (static_cast<std::size_t>(x.rows()) != rows_) {
    throw std::invalid_argument("spmm^T shape mismatch");
  }
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(cols_), x.cols());
  for (std::size_t r = 0; r < rows_; ++r) {
    auto src = x.row(static_cast<Eigen::Index>(r));
    for (std::size_t k = offsets_[r]; k < offsets_[r + 1]; ++k) {
      out.row(static_cast<Eigen::Index>(indices_[k])) += values_[k] * src;
    }
  }
  return out;
}

Matrix SparseMatrix::to_dense() const {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_));
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t k = offsets_[r]; k < offsets_[r + 1]; ++k) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(indices_[k])) += values_[k];
    }
  }
  return out;
}

}  // namespace disamgnn
