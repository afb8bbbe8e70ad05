#include "rksylv/dense_matrix.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace rksylv {

namespace {

using EigenMap = Eigen::Map<Eigen::MatrixXd>;
using ConstEigenMap = Eigen::Map<const Eigen::MatrixXd>;

ConstEigenMap as_eigen(const DenseMatrix& m) {
  return ConstEigenMap(m.data(), m.rows(), m.cols());
}

}  // namespace

DenseMatrix::DenseMatrix(int rows, int cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != static_cast<std::size_t>(rows) * cols)
    throw std::invalid_argument("DenseMatrix: data size does not match shape");
}

DenseMatrix DenseMatrix::identity(int n) {
  DenseMatrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void DenseMatrix::append_col(std::span<const double> c) {
  if (cols_ == 0 && rows_ == 0) rows_ = static_cast<int>(c.size());
  if (c.size() != static_cast<std::size_t>(rows_))
    throw std::invalid_argument("append_col: length mismatch");
  data_.insert(data_.end(), c.begin(), c.end());
  ++cols_;
}

DenseMatrix DenseMatrix::cols(int j0, int len) const {
  if (j0 < 0 || len < 0 || j0 + len > cols_) throw std::out_of_range("cols: range");
  DenseMatrix out(rows_, len);
  std::copy(data_.begin() + static_cast<std::size_t>(j0) * rows_,
            data_.begin() + static_cast<std::size_t>(j0 + len) * rows_, out.data_.begin());
  return out;
}

DenseMatrix DenseMatrix::rows_block(int i0, int len) const {
  if (i0 < 0 || len < 0 || i0 + len > rows_) throw std::out_of_range("rows_block: range");
  DenseMatrix out(len, cols_);
  for (int j = 0; j < cols_; ++j)
    for (int i = 0; i < len; ++i) out(i, j) = (*this)(i0 + i, j);
  return out;
}

DenseMatrix DenseMatrix::transposed() const {
  DenseMatrix out(cols_, rows_);
  for (int j = 0; j < cols_; ++j)
    for (int i = 0; i < rows_; ++i) out(j, i) = (*this)(i, j);
  return out;
}

double DenseMatrix::frobenius() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return std::sqrt(s);
}

DenseMatrix& DenseMatrix::operator+=(const DenseMatrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) throw std::invalid_argument("operator+=: shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

DenseMatrix& DenseMatrix::operator-=(const DenseMatrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) throw std::invalid_argument("operator-=: shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

DenseMatrix& DenseMatrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
  DenseMatrix c(a.rows(), b.cols());
  EigenMap(c.data(), c.rows(), c.cols()) = as_eigen(a) * as_eigen(b);
  return c;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) throw std::invalid_argument("matmul_tn: inner dimension mismatch");
  DenseMatrix c(a.cols(), b.cols());
  EigenMap(c.data(), c.rows(), c.cols()) = as_eigen(a).transpose() * as_eigen(b);
  return c;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("matmul_nt: inner dimension mismatch");
  DenseMatrix c(a.rows(), b.rows());
  EigenMap(c.data(), c.rows(), c.cols()) = as_eigen(a) * as_eigen(b).transpose();
  return c;
}

std::vector<double> matvec(const DenseMatrix& a, std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(a.cols())) throw std::invalid_argument("matvec: length mismatch");
  std::vector<double> y(a.rows());
  Eigen::Map<Eigen::VectorXd>(y.data(), a.rows()) =
      as_eigen(a) * Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
  return y;
}

std::vector<double> matvec_t(const DenseMatrix& a, std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(a.rows())) throw std::invalid_argument("matvec_t: length mismatch");
  std::vector<double> y(a.cols());
  Eigen::Map<Eigen::VectorXd>(y.data(), a.cols()) =
      as_eigen(a).transpose() * Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
  return y;
}

double dot(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

}  // namespace rksylv
