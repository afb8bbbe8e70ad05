#pragma once

#include <span>
#include <vector>

#include "rksylv/dense_matrix.hpp"
#include "rksylv/discretize.hpp"
#include "rksylv/sparse_matrix.hpp"

namespace rksylv {

struct TimeGrid {
  double T = 1.0;
  int n_T = 0;
  double tau() const { return T / n_T; }
};

enum class CaseTag { FullObservationDistributed, PartialObservation, BoundaryControl, NonsymmetricK };

// Structural descriptor of the 2 n_T x 2 n_T right coefficients of the matrix
// equation. Actions on a factor with 2 n_T columns are O(n_T) column sweeps;
// for the reduced assembly the nonzero entries are enumerated instead.
struct RightCoefficients {
  int n_T = 0;
  double tau = 0.0;
  double beta = 0.0;
  double alpha2 = 0.0;
  double alpha3 = 0.0;

  struct Entry {
    int row;
    int col;
    double value;
  };

  // X * (C1 - alpha2 * I0); the shift only touches the adjoint half.
  DenseMatrix apply_C1(const DenseMatrix& x) const;
  // X * I0 = [0, X_Y].
  DenseMatrix apply_I0(const DenseMatrix& x) const;
  // X * D = [-X_L / beta, 0].
  DenseMatrix apply_D(const DenseMatrix& x) const;
  // X * (I - alpha3 * D) = [X_Y + (alpha3/beta) X_L, X_L].
  DenseMatrix apply_E1(const DenseMatrix& x) const;

  std::vector<Entry> entries_C1() const;
  std::vector<Entry> entries_I0() const;
  std::vector<Entry> entries_D() const;
  std::vector<Entry> entries_E1() const;
  std::vector<Entry> entries_identity() const;
  // blkdiag(I, 0) and blkdiag(0, I): the split identities of the
  // nonsymmetric case.
  std::vector<Entry> entries_PY() const;
  std::vector<Entry> entries_PL() const;
};

// All-at-once optimality system in matrix-equation form:
//   A1 X + X C1 + A2 X I0 + A3 X D - F1 F2^T = 0,
// with X = [Y, Lambda] of width 2 n_T. Stored left coefficients are the
// mass-scaled discretization pieces; A3 stays in factored form when the
// control lives on the boundary.
struct SylvesterOperator {
  CaseTag tag = CaseTag::FullObservationDistributed;

  int n = 0;
  TimeGrid time;
  double beta = 0.0;

  SparseMatrix K;
  SparseMatrix Kt;
  std::vector<double> Mdiag;
  std::vector<double> M1diag;
  SparseMatrix N;
  std::vector<double> Mbdiag;
  std::vector<int> control_nodes;
  SparseMatrix NMbNt;  // N Mb^{-1} N^T, the control Gram matrix

  SparseMatrix A1;              // M^{-1} K
  SparseMatrix A1t;             // M^{-1} K^T, nonsymmetric case only
  std::vector<double> A2diag;   // M^{-1} M1, plus alpha2 once shifted
  std::vector<double> A3diag;   // M^{-1} N Mb^{-1} N^T when diagonal
  SparseMatrix MinvN;
  SparseMatrix MbinvNt;
  bool a3_factored = false;

  double alpha2 = 0.0;
  double alpha3 = 0.0;

  DenseMatrix F1;  // M^{-1} M1 Y1
  DenseMatrix Y1;
  DenseMatrix Y2;

  // Frobenius norms cached for the relative residual denominator.
  double normK = 0.0, normM = 0.0, normM1 = 0.0, normNMbNt = 0.0, normYhat = 0.0, normC = 0.0;

  double tau() const { return time.tau(); }
  int r() const { return F1.cols(); }
  RightCoefficients right() const { return {time.n_T, tau(), beta, alpha2, alpha3}; }

  // A3 x (factored or diagonal path; excludes the alpha3 * A1 part).
  std::vector<double> apply_A3(std::span<const double> x) const;
};

// Assembles the operator and detects the case tag from the discretization:
// partial observation (M1 != M), boundary control (N rectangular),
// nonsymmetric K. Combinations of those are rejected.
SylvesterOperator build_operator(const DiscretizedPDE& pde, const TimeGrid& time, double beta,
                                 const DesiredState& target);

// Diagonal shift A2 <- A2 + alpha2 I, compensated exactly by
// C1 <- C1 - alpha2 I0. alpha2 is a largest-eigenvalue estimate of A1 from a
// fixed-seed power iteration (20 steps). Not defined for boundary control.
void compute_alpha2(SylvesterOperator& op);

// Scaling parameter of the boundary-control transform
// A1 X (I - alpha3 D) + X C1 + A2 X I0 + (A3 + alpha3 A1) X D = F1 F2^T,
// with alpha3 = ||A3||_F / (sqrt(beta) ||A1||_F).
void compute_alpha3(SylvesterOperator& op);

// Residual of the matrix equation at X (dense evaluation for verification;
// the solver never calls this on full-size X).
DenseMatrix apply_operator(const SylvesterOperator& op, const DenseMatrix& x, bool include_rhs = true);

}  // namespace rksylv
