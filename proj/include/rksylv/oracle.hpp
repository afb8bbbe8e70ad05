#pragma once

#include <vector>

#include "rksylv/dense_matrix.hpp"
#include "rksylv/operator.hpp"
#include "rksylv/sparse_matrix.hpp"

namespace rksylv {

// Direct all-at-once reference solve of the full optimality system
//   [ tau (I x M1)            I x tau K^T + C^T x M ] [vec Y]   [tau vec(M1 Yhat)]
//   [ I x tau K + C x M      -(tau/beta) I x N Mb^{-1} N^T ] [vec L] = [0],
// used to verify the low-rank solver. Guarded to n * n_T <= 500000 unknowns
// per variable.
struct OracleSolution {
  DenseMatrix X;  // [Y, Lambda], n x 2 n_T
  DenseMatrix U;  // nb x n_T, recovered from the gradient equation
};

SparseMatrix assemble_full(const SylvesterOperator& op, std::vector<double>& rhs);

OracleSolution solve_full(const SylvesterOperator& op);

// Discrete tracking objective
//   sum_t tau/2 (y_t - yhat_t)^T M1 (y_t - yhat_t) + tau beta/2 u_t^T Mb u_t.
double objective(const SylvesterOperator& op, const DenseMatrix& y, const DenseMatrix& u);

}  // namespace rksylv
