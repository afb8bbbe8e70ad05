#pragma once

#include <complex>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "rksylv/dense_matrix.hpp"
#include "rksylv/sparse_matrix.hpp"

namespace rksylv {

// Direct factorization of a square sparse matrix. The symmetric flag selects a
// Cholesky-type path; it must only be set for symmetric quasi-definite input.
// Throws SingularMatrixError when a zero or below-threshold pivot is met.
class SparseFactorization {
 public:
  SparseFactorization(const SparseMatrix& a, bool symmetric);
  ~SparseFactorization();
  SparseFactorization(SparseFactorization&&) noexcept;
  SparseFactorization& operator=(SparseFactorization&&) noexcept;

  std::vector<double> solve(std::span<const double> b) const;
  void solve_inplace(std::span<double> b) const;
  // Column-wise solve: X = A^{-1} B.
  DenseMatrix solve(const DenseMatrix& b) const;

  int size() const { return n_; }
  // Bytes held by the factor storage, as reported by the backend.
  std::size_t memory_bytes() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int n_ = 0;
};

// x = A^{-1} b for dense square A via partially pivoted LU.
std::vector<double> dense_solve(const DenseMatrix& a, std::span<const double> b);

struct SvdResult {
  DenseMatrix u;            // m x k
  std::vector<double> sigma;  // k, descending
  DenseMatrix vt;           // k x n
};

// Thin SVD; k = min(m, n).
SvdResult dense_svd(const DenseMatrix& a);

struct GramSchmidtResult {
  std::vector<double> v;  // unit vector, empty on breakdown
  std::vector<double> h;  // projection coefficients onto the existing basis
  double norm_after;      // norm of the deflated vector before normalization
  bool breakdown;         // deflated norm <= 1e-12 * ||w||
};

// Orthonormalize w against the columns of V (two-pass classical Gram-Schmidt).
// h holds the accumulated coefficients of both passes, so V*h + norm_after*v = w.
GramSchmidtResult gram_schmidt_append(const DenseMatrix& v_basis, std::span<const double> w);

// Eigenvalues of a general square dense matrix.
std::vector<std::complex<double>> dense_eigenvalues(const DenseMatrix& a);

// Finite eigenvalues of the pencil (A, B); pairs with |beta| below a scaled
// threshold are dropped.
std::vector<std::complex<double>> generalized_eigenvalues(const DenseMatrix& a, const DenseMatrix& b);

// trace(A B^T) without forming the product.
double trace_product_nt(const DenseMatrix& a, const DenseMatrix& b);

}  // namespace rksylv
