#pragma once

#include <span>
#include <vector>

#include "rksylv/dense_matrix.hpp"

namespace rksylv {

struct Triplet {
  int row;
  int col;
  double value;
};

// Compressed sparse row matrix. Column indices are strictly increasing within
// each row and duplicates have been summed; explicit zeros may remain.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(int rows, int cols) : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

  static SparseMatrix from_triplets(int rows, int cols, std::vector<Triplet> entries);
  static SparseMatrix identity(int n);
  static SparseMatrix from_diagonal(std::span<const double> d);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }

  const std::vector<int>& row_ptr() const { return row_ptr_; }
  const std::vector<int>& col_idx() const { return col_idx_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  void matvec(std::span<const double> x, std::span<double> y) const;
  std::vector<double> matvec(std::span<const double> x) const;

  SparseMatrix transposed() const;
  SparseMatrix multiply(const SparseMatrix& other) const;
  DenseMatrix multiply_dense(const DenseMatrix& b) const;

  // Row scaling: A(i, :) *= s[i].
  void scale_rows(std::span<const double> s);

  std::vector<double> diagonal() const;
  double frobenius() const;

  // Entry lookup; zero when outside the pattern.
  double coeff(int i, int j) const;

  // Structural and ordering invariants; throws std::logic_error on violation.
  void validate() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<int> row_ptr_;
  std::vector<int> col_idx_;
  std::vector<double> values_;
};

// a*A + b*diag(d); the pattern is extended by missing diagonal positions.
SparseMatrix scaled_plus_diag(const SparseMatrix& a_mat, double a, std::span<const double> d, double b);

}  // namespace rksylv
