#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rksylv {

// Column-major dense matrix. Columns are contiguous, so growing by whole
// columns is an O(rows) append and a column is addressable as a span.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(int rows, int cols) : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, 0.0) {}
  DenseMatrix(int rows, int cols, std::vector<double> data);

  static DenseMatrix identity(int n);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }

  double& operator()(int i, int j) { return data_[static_cast<std::size_t>(j) * rows_ + i]; }
  double operator()(int i, int j) const { return data_[static_cast<std::size_t>(j) * rows_ + i]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  std::span<double> col(int j) { return {data_.data() + static_cast<std::size_t>(j) * rows_, static_cast<std::size_t>(rows_)}; }
  std::span<const double> col(int j) const { return {data_.data() + static_cast<std::size_t>(j) * rows_, static_cast<std::size_t>(rows_)}; }

  void append_col(std::span<const double> c);

  // Columns [j0, j0+len) as a copy.
  DenseMatrix cols(int j0, int len) const;
  // Rows [i0, i0+len) as a copy.
  DenseMatrix rows_block(int i0, int len) const;

  DenseMatrix transposed() const;
  double frobenius() const;

  DenseMatrix& operator+=(const DenseMatrix& other);
  DenseMatrix& operator-=(const DenseMatrix& other);
  DenseMatrix& operator*=(double s);

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

// C = A * B.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
// C = A^T * B.
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);
// C = A * B^T.
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);

// y = A x and y = A^T x for a single vector.
std::vector<double> matvec(const DenseMatrix& a, std::span<const double> x);
std::vector<double> matvec_t(const DenseMatrix& a, std::span<const double> x);

double dot(std::span<const double> x, std::span<const double> y);
double norm2(std::span<const double> x);

}  // namespace rksylv
