#include "rksylv/sparse_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rksylv {

SparseMatrix SparseMatrix::from_triplets(int rows, int cols, std::vector<Triplet> entries) {
  for (const Triplet& t : entries)
    if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols)
      throw std::out_of_range("from_triplets: index outside matrix");
  std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });

  SparseMatrix m(rows, cols);
  m.col_idx_.reserve(entries.size());
  m.values_.reserve(entries.size());
  for (std::size_t k = 0; k < entries.size();) {
    double sum = entries[k].value;
    std::size_t j = k + 1;
    while (j < entries.size() && entries[j].row == entries[k].row && entries[j].col == entries[k].col)
      sum += entries[j++].value;
    m.col_idx_.push_back(entries[k].col);
    m.values_.push_back(sum);
    ++m.row_ptr_[entries[k].row + 1];
    k = j;
  }
  for (int i = 0; i < rows; ++i) m.row_ptr_[i + 1] += m.row_ptr_[i];
  return m;
}

SparseMatrix SparseMatrix::identity(int n) {
  std::vector<double> ones(n, 1.0);
  return from_diagonal(ones);
}

SparseMatrix SparseMatrix::from_diagonal(std::span<const double> d) {
  const int n = static_cast<int>(d.size());
  SparseMatrix m(n, n);
  m.col_idx_.resize(n);
  m.values_.assign(d.begin(), d.end());
  for (int i = 0; i < n; ++i) {
    m.col_idx_[i] = i;
    m.row_ptr_[i + 1] = i + 1;
  }
  return m;
}

void SparseMatrix::matvec(std::span<const double> x, std::span<double> y) const {
  if (x.size() != static_cast<std::size_t>(cols_) || y.size() != static_cast<std::size_t>(rows_))
    throw std::invalid_argument("matvec: length mismatch");
  for (int i = 0; i < rows_; ++i) {
    double s = 0.0;
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += values_[k] * x[col_idx_[k]];
    y[i] = s;
  }
}

std::vector<double> SparseMatrix::matvec(std::span<const double> x) const {
  std::vector<double> y(rows_);
  matvec(x, y);
  return y;
}

SparseMatrix SparseMatrix::transposed() const {
  SparseMatrix t(cols_, rows_);
  t.col_idx_.resize(nnz());
  t.values_.resize(nnz());
  std::vector<int> count(cols_, 0);
  for (int c : col_idx_) ++count[c];
  for (int j = 0; j < cols_; ++j) t.row_ptr_[j + 1] = t.row_ptr_[j] + count[j];
  std::vector<int> next(t.row_ptr_.begin(), t.row_ptr_.end() - 1);
  for (int i = 0; i < rows_; ++i)
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      const int pos = next[col_idx_[k]]++;
      t.col_idx_[pos] = i;
      t.values_[pos] = values_[k];
    }
  return t;
}

SparseMatrix SparseMatrix::multiply(const SparseMatrix& other) const {
  if (cols_ != other.rows_) throw std::invalid_argument("multiply: inner dimension mismatch");
  std::vector<Triplet> acc;
  std::vector<double> work(other.cols_, 0.0);
  std::vector<int> marked;
  for (int i = 0; i < rows_; ++i) {
    marked.clear();
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      const int j = col_idx_[k];
      const double v = values_[k];
      for (int l = other.row_ptr_[j]; l < other.row_ptr_[j + 1]; ++l) {
        if (work[other.col_idx_[l]] == 0.0) marked.push_back(other.col_idx_[l]);
        work[other.col_idx_[l]] += v * other.values_[l];
      }
    }
    for (int c : marked) {
      acc.push_back({i, c, work[c]});
      work[c] = 0.0;
    }
  }
  return from_triplets(rows_, other.cols_, std::move(acc));
}

DenseMatrix SparseMatrix::multiply_dense(const DenseMatrix& b) const {
  if (b.rows() != cols_) throw std::invalid_argument("multiply_dense: inner dimension mismatch");
  DenseMatrix c(rows_, b.cols());
  for (int j = 0; j < b.cols(); ++j) matvec(b.col(j), c.col(j));
  return c;
}

void SparseMatrix::scale_rows(std::span<const double> s) {
  if (s.size() != static_cast<std::size_t>(rows_)) throw std::invalid_argument("scale_rows: length mismatch");
  for (int i = 0; i < rows_; ++i)
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) values_[k] *= s[i];
}

std::vector<double> SparseMatrix::diagonal() const {
  std::vector<double> d(std::min(rows_, cols_), 0.0);
  for (int i = 0; i < static_cast<int>(d.size()); ++i) d[i] = coeff(i, i);
  return d;
}

double SparseMatrix::frobenius() const {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return std::sqrt(s);
}

double SparseMatrix::coeff(int i, int j) const {
  if (i < 0 || i >= rows_ || j < 0 || j >= cols_) throw std::out_of_range("coeff: index");
  const auto begin = col_idx_.begin() + row_ptr_[i];
  const auto end = col_idx_.begin() + row_ptr_[i + 1];
  const auto it = std::lower_bound(begin, end, j);
  if (it == end || *it != j) return 0.0;
  return values_[it - col_idx_.begin()];
}

void SparseMatrix::validate() const {
  if (static_cast<int>(row_ptr_.size()) != rows_ + 1) throw std::logic_error("validate: row_ptr size");
  if (row_ptr_.front() != 0 || row_ptr_.back() != static_cast<int>(nnz()))
    throw std::logic_error("validate: row_ptr range");
  if (col_idx_.size() != values_.size()) throw std::logic_error("validate: value/index size");
  for (int i = 0; i < rows_; ++i) {
    if (row_ptr_[i] > row_ptr_[i + 1]) throw std::logic_error("validate: row_ptr not monotone");
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      if (col_idx_[k] < 0 || col_idx_[k] >= cols_) throw std::logic_error("validate: column index range");
      if (k > row_ptr_[i] && col_idx_[k - 1] >= col_idx_[k])
        throw std::logic_error("validate: columns not strictly increasing within row");
    }
  }
}

SparseMatrix scaled_plus_diag(const SparseMatrix& a_mat, double a, std::span<const double> d, double b) {
  if (a_mat.rows() != a_mat.cols() || a_mat.rows() != static_cast<int>(d.size()))
    throw std::invalid_argument("scaled_plus_diag: shape mismatch");
  std::vector<Triplet> entries;
  entries.reserve(a_mat.nnz() + d.size());
  const auto& rp = a_mat.row_ptr();
  const auto& ci = a_mat.col_idx();
  const auto& v = a_mat.values();
  for (int i = 0; i < a_mat.rows(); ++i)
    for (int k = rp[i]; k < rp[i + 1]; ++k) entries.push_back({i, ci[k], a * v[k]});
  for (int i = 0; i < static_cast<int>(d.size()); ++i) entries.push_back({i, i, b * d[i]});
  return SparseMatrix::from_triplets(a_mat.rows(), a_mat.cols(), std::move(entries));
}

}  // namespace rksylv
