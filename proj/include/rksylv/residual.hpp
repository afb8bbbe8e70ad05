#pragma once

#include <span>
#include <vector>

#include "rksylv/dense_matrix.hpp"
#include "rksylv/operator.hpp"

namespace rksylv {

// The two eliminated optimality equations whose residuals are tracked:
//   Adjoint: tau M1 Y + tau K^T L + M L C - tau M1 Yhat
//   State:   tau K Y + M Y C^T - (tau/beta) N Mb^{-1} N^T L
// with Y = V Z_Y, L = V Z_L.
enum class EquationSide { Adjoint, State };

// Low-rank residual factor R = R_L * R_row with R_L = Q * R_fac maintained by
// an updated QR. R_L gains the fixed right-hand-side columns first (adjoint
// side only), then three columns per appended basis vector, so the Frobenius
// norm of R is ||R_fac * R_row||_F at any basis size without touching R_L.
class ResidualFactors {
 public:
  ResidualFactors(const SylvesterOperator& op, EquationSide side);

  void append_basis_vector(std::span<const double> v);

  int basis_size() const { return p_; }
  int left_cols() const { return static_cast<int>(r_cols_.size()); }
  const DenseMatrix& q() const { return q_; }
  // Q * R_fac, the tracked left factor reassembled densely (verification aid).
  DenseMatrix left_factor() const;

  // Right factor rows (q x n_T) for the coefficient matrix Z (p x 2 n_T).
  DenseMatrix right_rows(const DenseMatrix& z) const;
  // ||R_L * R_row||_F = ||R_fac * R_row||_F.
  double norm(const DenseMatrix& z) const;

 private:
  void append_column(std::span<const double> c);

  const SylvesterOperator* op_;
  EquationSide side_;
  int p_ = 0;
  DenseMatrix q_;                             // n x q_eff, orthonormal
  std::vector<std::vector<double>> r_cols_;   // R_fac columns; shorter columns
                                              // imply zero rows below
};

struct ResidualNorms {
  double r1 = 0.0;   // adjoint equation
  double r2 = 0.0;   // state equation
  double rho3 = 0.0; // combined relative residual
  double worst() const { return r1 > r2 ? (r1 > rho3 ? r1 : rho3) : (r2 > rho3 ? r2 : rho3); }
};

ResidualNorms residual_norms(const ResidualFactors& adjoint, const ResidualFactors& state,
                             const DenseMatrix& z, const SylvesterOperator& op);

// Inclusive test max(r1, r2, rho3) <= tol.
bool stopping_check(const ResidualNorms& norms, double tol);

// Dense reassembly of one residual for verification.
DenseMatrix dense_residual(const SylvesterOperator& op, const DenseMatrix& v_basis,
                           const DenseMatrix& z, EquationSide side);

}  // namespace rksylv
