#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rksylv/dense_matrix.hpp"
#include "rksylv/operator.hpp"
#include "rksylv/residual.hpp"

namespace rksylv {

struct SolverConfig {
  double tol = 1e-4;
  int max_iterations = 200;
  bool truncate = false;
  double truncation_threshold = 1e-12;
  // Forces the one-direction expansion recipe everywhere it is admissible;
  // diagnostic knob, reproduces the partial-observation stall.
  bool single_direction = false;

  // tol below 1e-8 is rejected: the tracked residual updates accumulate
  // round-off and cannot certify tighter accuracy.
  void validate() const;
};

struct IterationRecord {
  int iteration = 0;
  int basis_size = 0;
  ResidualNorms norms;
  double shift1 = 0.0;
  double shift2 = 0.0;
};

struct SolveReport {
  bool converged = false;
  bool stagnated = false;
  std::string message;
  int iterations = 0;
  int basis_size = 0;
  int max_basis_size = 0;
  int solution_rank = 0;
  double wall_seconds = 0.0;
  std::size_t peak_bytes = 0;
  std::vector<IterationRecord> history;
};

// Rational Krylov subspace together with everything projected onto it.
// Projections, products and residual trackers are updated incrementally per
// appended vector and rebuilt from scratch after a truncation.
struct KrylovState {
  DenseMatrix V;              // n x p, orthonormal columns
  std::vector<double> latest; // newest accepted direction, survives truncation
  DenseMatrix W1;             // A1 V
  DenseMatrix W1t;            // A1^T-side product (nonsymmetric case)
  DenseMatrix W3;             // A3 V
  DenseMatrix A1r, A1tr, A2r, A3r;
  DenseMatrix F1r;
  DenseMatrix Z;              // p x 2 n_T reduced solution
  std::vector<double> shifts1, shifts2;
  std::unique_ptr<ResidualFactors> adjoint;
  std::unique_ptr<ResidualFactors> state_eq;
  int breakdowns = 0;
  std::size_t reduced_bytes = 0;  // last reduced-system assembly and factor
  std::size_t expand_bytes = 0;   // largest shifted-solve factor seen

  int p() const { return V.cols(); }
};

KrylovState initialize(const SylvesterOperator& op, const SolverConfig& config);

// Next shift(s) from the Ritz values of the projected coefficients; returns
// the primary and (when the recipe has two directions) secondary shift and
// records both in the state's history.
std::pair<double, double> next_shifts(KrylovState& state, const SylvesterOperator& op,
                                      const SolverConfig& config);

// Solves the per-case shifted systems against the latest direction and
// appends the orthonormalized results; returns the number of accepted
// vectors (breakdown candidates are skipped).
int expand_basis(KrylovState& state, const SylvesterOperator& op, const SolverConfig& config,
                 double s1, double s2);

// Assembles the projected all-at-once system sparsely and solves it with a
// sparse direct method; fills state.Z.
void solve_reduced(KrylovState& state, const SylvesterOperator& op);

// SVD-based basis compression; keeps singular directions of Z above
// threshold * sigma_1 (at least one, at most n_T) and rebuilds projections.
void truncate_basis(KrylovState& state, const SylvesterOperator& op, const SolverConfig& config);

struct SolveResult {
  DenseMatrix V;
  DenseMatrix Z;
  SolveReport report;
};

// Full iteration: shifts, expansion, reduced solve, residual check,
// truncation. Stops on convergence, stagnation (three iterations without
// basis growth or meaningful residual decrease) or the iteration cap.
SolveResult solve(const SylvesterOperator& op, const SolverConfig& config,
                  const std::function<void(const KrylovState&, const IterationRecord&)>& observer = {});

// Low-rank factors of the recovered variables: Y = basis Zy, Lambda = basis Zl,
// U = Ul Zl with Ul = (1/beta) Mb^{-1} N^T basis.
struct SolutionFactors {
  DenseMatrix basis;
  DenseMatrix Zy;
  DenseMatrix Zl;
  DenseMatrix Ul;
};

SolutionFactors recover_solution(const DenseMatrix& v_basis, const DenseMatrix& z,
                                 const SylvesterOperator& op);

}  // namespace rksylv
