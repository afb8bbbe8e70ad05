#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "rksylv/discretize.hpp"
#include "rksylv/errors.hpp"
#include "rksylv/linalg.hpp"
#include "rksylv/operator.hpp"
#include "rksylv/oracle.hpp"

using namespace rksylv;

namespace {

SylvesterOperator heat_operator(int k, int n_T, double beta) {
  const Grid g = build_grid(k, Domain::UnitSquare);
  const DiscretizedPDE pde = assemble_heat(g);
  const DesiredState target = make_desired_state(DesiredStateKind::ConstantRank1, g, n_T);
  return build_operator(pde, TimeGrid{1.0, n_T}, beta, target);
}

// Implicit Euler forward sweep of the state equation
//   tau K y_t + M (y_t - y_{t-1}) = tau N u_t,  y_0 = 0,
// the feasibility map the adjoint-based oracle must satisfy.
DenseMatrix forward_state(const SylvesterOperator& op, const DenseMatrix& u) {
  const double tau = op.tau();
  SparseMatrix lhs = op.K;
  for (double& v : lhs.values()) v *= tau;
  lhs = scaled_plus_diag(lhs, 1.0, op.Mdiag, 1.0);
  const SparseFactorization fac(lhs, false);

  DenseMatrix y(op.n, op.time.n_T);
  std::vector<double> prev(op.n, 0.0);
  std::vector<double> rhs(op.n);
  for (int t = 0; t < op.time.n_T; ++t) {
    op.N.matvec(u.col(t), rhs);
    for (int i = 0; i < op.n; ++i) rhs[i] = tau * rhs[i] + op.Mdiag[i] * prev[i];
    fac.solve_inplace(rhs);
    for (int i = 0; i < op.n; ++i) y(i, t) = rhs[i];
    prev = rhs;
  }
  return y;
}

}  // namespace

TEST_CASE("oracle shapes match the operator") {
  const SylvesterOperator op = heat_operator(3, 6, 1e-2);
  const OracleSolution sol = solve_full(op);
  CHECK(sol.X.rows() == op.n);
  CHECK(sol.X.cols() == 2 * op.time.n_T);
  CHECK(sol.U.rows() == op.N.cols());
  CHECK(sol.U.cols() == op.time.n_T);
}

TEST_CASE("zero target yields the zero solution") {
  const Grid g = build_grid(3, Domain::UnitSquare);
  const DiscretizedPDE pde = assemble_heat(g);
  DesiredState target;
  target.Y1 = DenseMatrix(g.n, 1);
  target.Y2 = DenseMatrix(5, 1);
  for (int t = 0; t < 5; ++t) target.Y2(t, 0) = 1.0;
  const SylvesterOperator op = build_operator(pde, TimeGrid{1.0, 5}, 1e-2, target);
  const OracleSolution sol = solve_full(op);
  CHECK(sol.X.frobenius() <= 1e-12);
  CHECK(sol.U.frobenius() <= 1e-12);
}

TEST_CASE("oracle zeroes the matrix-equation residual") {
  for (double beta : {1e-1, 1e-3}) {
    SylvesterOperator op = heat_operator(3, 8, beta);
    compute_alpha2(op);
    const OracleSolution sol = solve_full(op);
    const DenseMatrix residual = apply_operator(op, sol.X);
    const DenseMatrix rhs = apply_operator(op, DenseMatrix(op.n, 2 * op.time.n_T));
    REQUIRE(rhs.frobenius() > 0.0);
    CHECK(residual.frobenius() <= 1e-10 * rhs.frobenius());
  }
}

TEST_CASE("oracle state is feasible and the objective is a minimum") {
  const SylvesterOperator op = heat_operator(3, 6, 1e-2);
  const OracleSolution sol = solve_full(op);

  // Forward simulation of the oracle control reproduces the oracle state.
  const DenseMatrix y = sol.X.cols(0, op.time.n_T);
  DenseMatrix err = forward_state(op, sol.U);
  err -= y;
  CHECK(err.frobenius() <= 1e-9 * (1.0 + y.frobenius()));

  const double best = objective(op, y, sol.U);
  std::mt19937 gen(7);
  std::normal_distribution<double> dist;
  for (int trial = 0; trial < 4; ++trial) {
    DenseMatrix u = sol.U;
    const double scale = trial < 2 ? 1e-2 : 1.0;
    for (int t = 0; t < u.cols(); ++t)
      for (int i = 0; i < u.rows(); ++i) u(i, t) += scale * dist(gen);
    const double perturbed = objective(op, forward_state(op, u), u);
    CHECK(perturbed >= best * (1.0 - 1e-10));
  }
}

TEST_CASE("objective evaluates the discrete tracking functional") {
  const SylvesterOperator op = heat_operator(2, 3, 0.5);
  const int n = op.n;
  std::mt19937 gen(11);
  std::normal_distribution<double> dist;
  DenseMatrix y(n, 3), u(n, 3);
  for (int t = 0; t < 3; ++t)
    for (int i = 0; i < n; ++i) {
      y(i, t) = dist(gen);
      u(i, t) = dist(gen);
    }
  const DenseMatrix yhat = matmul_nt(op.Y1, op.Y2);
  double expect = 0.0;
  const double tau = op.tau();
  for (int t = 0; t < 3; ++t)
    for (int i = 0; i < n; ++i) {
      const double d = y(i, t) - yhat(i, t);
      expect += 0.5 * tau * op.M1diag[i] * d * d;
      expect += 0.5 * tau * op.beta * op.Mbdiag[i] * u(i, t) * u(i, t);
    }
  CHECK(objective(op, y, u) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("assembled system is symmetric and carries the tracking right-hand side") {
  const SylvesterOperator op = heat_operator(2, 4, 1e-2);
  std::vector<double> rhs;
  const SparseMatrix s = assemble_full(op, rhs);
  const int dim = 2 * op.n * op.time.n_T;
  REQUIRE(s.rows() == dim);
  REQUIRE(s.cols() == dim);
  REQUIRE(static_cast<int>(rhs.size()) == dim);

  // Symmetry through random probes: v^T (S w) == w^T (S v).
  std::mt19937 gen(3);
  std::normal_distribution<double> dist;
  for (int trial = 0; trial < 3; ++trial) {
    std::vector<double> v(dim), w(dim);
    for (int i = 0; i < dim; ++i) {
      v[i] = dist(gen);
      w[i] = dist(gen);
    }
    const std::vector<double> sv = s.matvec(v);
    const std::vector<double> sw = s.matvec(w);
    double vsw = 0.0, wsv = 0.0;
    for (int i = 0; i < dim; ++i) {
      vsw += v[i] * sw[i];
      wsv += w[i] * sv[i];
    }
    CHECK(vsw == doctest::Approx(wsv).epsilon(1e-10));
  }

  const DenseMatrix yhat = matmul_nt(op.Y1, op.Y2);
  const double tau = op.tau();
  for (int t = 0; t < op.time.n_T; ++t)
    for (int i = 0; i < op.n; ++i) {
      CHECK(rhs[t * op.n + i] ==
            doctest::Approx(tau * op.M1diag[i] * yhat(i, t)).epsilon(1e-13));
      CHECK(rhs[(op.time.n_T + t) * op.n + i] == 0.0);
    }
}

TEST_CASE("size guard rejects oversized direct solves") {
  const SylvesterOperator op = heat_operator(5, 500, 1e-2);  // 1089 * 500 > 5e5
  CHECK_THROWS_AS(solve_full(op), SizeGuardError);
}
