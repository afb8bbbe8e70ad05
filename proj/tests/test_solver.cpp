#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rksylv/discretize.hpp"
#include "rksylv/errors.hpp"
#include "rksylv/linalg.hpp"
#include "rksylv/operator.hpp"
#include "rksylv/oracle.hpp"
#include "rksylv/solver.hpp"

using namespace rksylv;

namespace {

// Scalar-coefficient operator: n = 1 with K = a1, M1 = a2, N chosen so the
// control Gram term equals a3 (M = Mb = 1).
SylvesterOperator scalar_operator(double a1, double a2, double a3, double beta, double tau,
                                  double f1, double y2) {
  DiscretizedPDE pde;
  pde.K = SparseMatrix::from_triplets(1, 1, {{0, 0, a1}});
  pde.M.assign(1, 1.0);
  pde.M1.assign(1, a2);
  pde.N = SparseMatrix::from_triplets(1, 1, {{0, 0, std::sqrt(a3)}});
  pde.Mb.assign(1, 1.0);
  DesiredState target;
  target.Y1 = DenseMatrix(1, 1);
  target.Y1(0, 0) = f1 / a2;  // F1 = M^{-1} M1 Y1 = a2 Y1
  target.Y2 = DenseMatrix(1, 1);
  target.Y2(0, 0) = y2;
  return build_operator(pde, TimeGrid{tau, 1}, beta, target);
}

struct Bench {
  Grid grid;
  SylvesterOperator op;
};

Bench make_bench(CaseTag tag, int level, int n_T, double beta) {
  Bench b;
  const Domain dom = tag == CaseTag::NonsymmetricK ? Domain::CenteredSquare : Domain::UnitSquare;
  b.grid = build_grid(level, dom);
  DiscretizedPDE pde = tag == CaseTag::NonsymmetricK ? assemble_convection_diffusion(b.grid, 0.1)
                                                     : assemble_heat(b.grid);
  if (tag == CaseTag::PartialObservation) {
    std::vector<int> hide(b.grid.n / 4);
    for (std::size_t i = 0; i < hide.size(); ++i) hide[i] = static_cast<int>(2 * i);
    pde = apply_observation_mask(pde, hide);
  }
  if (tag == CaseTag::BoundaryControl) pde = restrict_control_to_boundary(pde, b.grid);
  const DesiredState target = make_desired_state(DesiredStateKind::ConstantRank1, b.grid, n_T);
  b.op = build_operator(pde, TimeGrid{1.0, n_T}, beta, target);
  if (tag == CaseTag::BoundaryControl)
    compute_alpha3(b.op);
  else
    compute_alpha2(b.op);
  return b;
}

double max_offdiag_identity_gap(const DenseMatrix& v) {
  const DenseMatrix g = matmul_tn(v, v);
  double worst = 0.0;
  for (int i = 0; i < g.cols(); ++i)
    for (int j = 0; j < g.cols(); ++j)
      worst = std::max(worst, std::abs(g(i, j) - (i == j ? 1.0 : 0.0)));
  return worst;
}

}  // namespace

TEST_CASE("config validation enforces the accuracy floor") {
  SolverConfig cfg;
  cfg.validate();
  cfg.tol = 1e-9;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.tol = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.tol = 1e-8;
  cfg.validate();
  cfg.max_iterations = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.max_iterations = 10;
  cfg.truncate = true;
  cfg.truncation_threshold = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.truncation_threshold = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.truncation_threshold = 1e-10;
  cfg.validate();
}

TEST_CASE("initialization orthonormalizes the right-hand side") {
  DiscretizedPDE pde;
  const int n = 5;
  std::vector<Triplet> k;
  for (int i = 0; i < n; ++i) k.push_back({i, i, 2.0});
  pde.K = SparseMatrix::from_triplets(n, n, std::move(k));
  pde.M.assign(n, 1.0);
  pde.M1 = pde.M;
  pde.N = SparseMatrix::from_diagonal(pde.M);
  pde.Mb = pde.M;

  DesiredState target;
  target.Y1 = DenseMatrix(n, 1);
  target.Y1(0, 0) = 3.0;  // F1 = 3 e1
  target.Y2 = DenseMatrix(4, 1);
  for (int t = 0; t < 4; ++t) target.Y2(t, 0) = 1.0;
  const SylvesterOperator op = build_operator(pde, TimeGrid{1.0, 4}, 0.5, target);

  const KrylovState st = initialize(op, SolverConfig{});
  REQUIRE(st.p() == 1);
  CHECK(st.V(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  for (int i = 1; i < n; ++i) CHECK(st.V(i, 0) == doctest::Approx(0.0));
  CHECK(st.F1r(0, 0) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(st.A1r(0, 0) == doctest::Approx(2.0).epsilon(1e-14));

  // Two independent right-hand-side columns give p = 2.
  DesiredState wide = target;
  wide.Y1 = DenseMatrix(n, 2);
  wide.Y1(0, 0) = 1.0;
  wide.Y1(1, 1) = 2.0;
  wide.Y2 = DenseMatrix(4, 2);
  for (int t = 0; t < 4; ++t) wide.Y2(t, 0) = wide.Y2(t, 1) = 1.0;
  const SylvesterOperator op2 = build_operator(pde, TimeGrid{1.0, 4}, 0.5, wide);
  CHECK(initialize(op2, SolverConfig{}).p() == 2);
}

TEST_CASE("zero target converges immediately with the zero solution") {
  const Grid g = build_grid(2, Domain::UnitSquare);
  const DiscretizedPDE pde = assemble_heat(g);
  DesiredState target;
  target.Y1 = DenseMatrix(g.n, 1);
  target.Y2 = DenseMatrix(5, 1);
  for (int t = 0; t < 5; ++t) target.Y2(t, 0) = 1.0;
  const SylvesterOperator op = build_operator(pde, TimeGrid{1.0, 5}, 0.01, target);

  const SolveResult res = solve(op, SolverConfig{});
  CHECK(res.report.converged);
  CHECK(res.report.iterations == 0);
  CHECK(res.V.cols() == 0);
  CHECK(res.Z.rows() == 0);
  CHECK(res.report.solution_rank == 0);
}

TEST_CASE("reduced solve reproduces the scalar closed form") {
  const SylvesterOperator op = scalar_operator(2.0, 3.0, 4.0, 0.5, 0.25, 1.0, 1.0);
  REQUIRE(op.n == 1);
  KrylovState st = initialize(op, SolverConfig{});
  REQUIRE(st.p() == 1);
  REQUIRE(st.V(0, 0) == doctest::Approx(1.0));
  solve_reduced(st, op);
  REQUIRE(st.Z.rows() == 1);
  REQUIRE(st.Z.cols() == 2);
  // Hand elimination of the 2x2 system
  //   (a1 + 1/tau) zY - (a3/beta) zL = 0
  //   a2 zY + (a1 + 1/tau) zL = f1 y2
  CHECK(st.Z(0, 0) == doctest::Approx(2.0 / 15.0).epsilon(1e-13));
  CHECK(st.Z(0, 1) == doctest::Approx(0.1).epsilon(1e-13));
}

TEST_CASE("reduced solve satisfies the projected equation and Galerkin orthogonality") {
  for (CaseTag tag : {CaseTag::FullObservationDistributed, CaseTag::PartialObservation,
                      CaseTag::BoundaryControl, CaseTag::NonsymmetricK}) {
    const Bench b = make_bench(tag, 2, 5, 0.02);
    SolverConfig cfg;
    KrylovState st = initialize(b.op, cfg);
    for (int it = 0; it < 3; ++it) {
      auto [s1, s2] = next_shifts(st, b.op, cfg);
      expand_basis(st, b.op, cfg, s1, s2);
    }
    solve_reduced(st, b.op);
    const int p = st.p();
    const int n_T = 5;

    // Projected equation: A1r Z + Z C1 + A2r Z I0 + A3r' Z D = F1r F2^T,
    // with the case-specific left coefficients.
    const RightCoefficients rc = b.op.right();
    DenseMatrix lhs(p, 2 * n_T);
    if (tag == CaseTag::BoundaryControl) {
      lhs = matmul(st.A1r, rc.apply_E1(st.Z));
      DenseMatrix a3s = st.A3r;
      DenseMatrix a1s = st.A1r;
      a1s *= b.op.alpha3;
      a3s += a1s;
      lhs += matmul(a3s, rc.apply_D(st.Z));
    } else if (tag == CaseTag::NonsymmetricK) {
      DenseMatrix zy(p, 2 * n_T), zl(p, 2 * n_T);
      for (int t = 0; t < n_T; ++t)
        for (int i = 0; i < p; ++i) {
          zy(i, t) = st.Z(i, t);
          zl(i, n_T + t) = st.Z(i, n_T + t);
        }
      lhs = matmul(st.A1r, zy);
      lhs += matmul(st.A1tr, zl);
      lhs += matmul(st.A3r, rc.apply_D(st.Z));
    } else {
      lhs = matmul(st.A1r, st.Z);
      lhs += matmul(st.A3r, rc.apply_D(st.Z));
    }
    lhs += rc.apply_C1(st.Z);
    lhs += matmul(st.A2r, rc.apply_I0(st.Z));
    DenseMatrix rhs(p, 2 * n_T);
    for (int t = 0; t < n_T; ++t)
      for (int i = 0; i < p; ++i) {
        double v = 0.0;
        for (int j = 0; j < b.op.r(); ++j) v += st.F1r(i, j) * b.op.Y2(t, j);
        rhs(i, n_T + t) = v;
      }
    lhs -= rhs;
    CHECK(lhs.frobenius() <= 1e-13 * (1.0 + rhs.frobenius()));

    // Galerkin orthogonality of the dense residual.
    const DenseMatrix x = matmul(st.V, st.Z);
    const DenseMatrix r_dense = apply_operator(b.op, x);
    const DenseMatrix vtr = matmul_tn(st.V, r_dense);
    const DenseMatrix f1f2 = matmul_nt(b.op.F1, b.op.Y2);
    CHECK(vtr.frobenius() <= 1e-8 * f1f2.frobenius());
  }
}

TEST_CASE("identity coefficients converge inside the right-hand-side span") {
  DiscretizedPDE pde;
  const int n = 6;
  std::vector<Triplet> k;
  for (int i = 0; i < n; ++i) k.push_back({i, i, 1.0});
  pde.K = SparseMatrix::from_triplets(n, n, std::move(k));
  pde.M.assign(n, 1.0);
  pde.M1 = pde.M;
  pde.N = SparseMatrix::from_diagonal(pde.M);
  pde.Mb = pde.M;
  DesiredState target;
  target.Y1 = DenseMatrix(n, 1);
  for (int i = 0; i < n; ++i) target.Y1(i, 0) = 1.0 + i;
  target.Y2 = DenseMatrix(3, 1);
  for (int t = 0; t < 3; ++t) target.Y2(t, 0) = 1.0;
  const SylvesterOperator op = build_operator(pde, TimeGrid{1.0, 3}, 0.5, target);

  SolverConfig cfg;
  cfg.tol = 1e-8;
  const SolveResult res = solve(op, cfg);
  CHECK(res.report.converged);
  CHECK(res.V.cols() == 1);
  CHECK(res.report.history.back().norms.worst() <= cfg.tol);

  // The dense residual vanishes, not only the projected one.
  const DenseMatrix r = apply_operator(op, matmul(res.V, res.Z));
  CHECK(r.frobenius() <= 1e-10);
}

TEST_CASE("invariants hold at every iteration of a small solve") {
  for (CaseTag tag : {CaseTag::FullObservationDistributed, CaseTag::PartialObservation,
                      CaseTag::BoundaryControl, CaseTag::NonsymmetricK}) {
    const Bench b = make_bench(tag, 3, 8, 0.01);
    SolverConfig cfg;
    cfg.tol = 1e-6;
    int seen = 0;
    const SolveResult res = solve(b.op, cfg, [&](const KrylovState& st, const IterationRecord& rec) {
      ++seen;
      CHECK(max_offdiag_identity_gap(st.V) <= 1e-10);
      CHECK(rec.basis_size == st.p());
      CHECK(rec.shift1 > 0.0);

      // Incremental projections match from-scratch products.
      const DenseMatrix a1v = b.op.A1.multiply_dense(st.V);
      DenseMatrix gap = matmul_tn(st.V, a1v);
      gap -= st.A1r;
      CHECK(gap.frobenius() <= 1e-12 * (1.0 + st.A1r.frobenius()));

      DenseMatrix a3v(b.op.n, st.p());
      for (int j = 0; j < st.p(); ++j) {
        const std::vector<double> w = b.op.apply_A3(st.V.col(j));
        for (int i = 0; i < b.op.n; ++i) a3v(i, j) = w[i];
      }
      DenseMatrix gap3 = matmul_tn(st.V, a3v);
      gap3 -= st.A3r;
      CHECK(gap3.frobenius() <= 1e-12 * (1.0 + st.A3r.frobenius()));

      DenseMatrix f_gap = matmul_tn(st.V, b.op.F1);
      f_gap -= st.F1r;
      CHECK(f_gap.frobenius() <= 1e-12 * (1.0 + st.F1r.frobenius()));
    });
    CHECK(res.report.converged);
    CHECK(seen == res.report.iterations);
    CHECK(static_cast<int>(res.report.history.size()) == res.report.iterations);
    CHECK(res.report.history.back().norms.worst() <= cfg.tol);
    CHECK(res.report.peak_bytes > 0);
    CHECK(res.report.wall_seconds >= 0.0);
  }
}

TEST_CASE("small heat instance matches the direct oracle") {
  const Bench b = make_bench(CaseTag::FullObservationDistributed, 3, 10, 1e-3);
  SolverConfig cfg;
  cfg.tol = 1e-6;
  const SolveResult res = solve(b.op, cfg);
  REQUIRE(res.report.converged);

  const OracleSolution ref = solve_full(b.op);
  DenseMatrix err = matmul(res.V, res.Z);
  err -= ref.X;
  CHECK(err.frobenius() <= 1e-4 * ref.X.frobenius());

  const SolutionFactors sol = recover_solution(res.V, res.Z, b.op);
  DenseMatrix u = matmul(sol.Ul, sol.Zl);
  u -= ref.U;
  CHECK(u.frobenius() <= 1e-4 * ref.U.frobenius());
}

TEST_CASE("recovered solution satisfies the discrete state equation") {
  const Bench b = make_bench(CaseTag::FullObservationDistributed, 3, 8, 1e-2);
  SolverConfig cfg;
  cfg.tol = 1e-6;
  const SolveResult res = solve(b.op, cfg);
  REQUIRE(res.report.converged);
  const SolutionFactors sol = recover_solution(res.V, res.Z, b.op);
  const DenseMatrix y = matmul(sol.basis, sol.Zy);
  const DenseMatrix u = matmul(sol.Ul, sol.Zl);
  const double tau = b.op.tau();

  double worst = 0.0;
  double scale = 0.0;
  for (int t = 0; t < 8; ++t) {
    const std::vector<double> ky = b.op.K.matvec(y.col(t));
    const std::vector<double> nu = b.op.N.matvec(u.col(t));
    for (int i = 0; i < b.op.n; ++i) {
      const double prev = t > 0 ? y(i, t - 1) : 0.0;
      const double r = b.op.Mdiag[i] * (y(i, t) - prev) + tau * ky[i] - tau * nu[i];
      worst = std::max(worst, std::abs(r));
      scale = std::max(scale, std::abs(tau * ky[i]) + std::abs(b.op.Mdiag[i] * y(i, t)));
    }
  }
  CHECK(worst <= 1e-5 * (1.0 + scale));
}

TEST_CASE("control factors scale linearly in the penalty") {
  const Bench b1 = make_bench(CaseTag::FullObservationDistributed, 2, 4, 0.02);
  Bench b2 = b1;
  b2.op.beta = 0.04;
  DenseMatrix v(b1.op.n, 1);
  v(3, 0) = 1.0;
  DenseMatrix z(1, 8);
  for (int j = 0; j < 8; ++j) z(0, j) = j + 1.0;

  const SolutionFactors s1 = recover_solution(v, z, b1.op);
  const SolutionFactors s2 = recover_solution(v, z, b2.op);
  for (int i = 0; i < s1.Ul.rows(); ++i)
    CHECK(s1.Ul(i, 0) == doctest::Approx(2.0 * s2.Ul(i, 0)).epsilon(1e-13));

  // Zero adjoint part gives zero control.
  DenseMatrix z0 = z;
  for (int t = 4; t < 8; ++t) z0(0, t) = 0.0;
  const SolutionFactors s0 = recover_solution(v, z0, b1.op);
  const DenseMatrix u = matmul(s0.Ul, s0.Zl);
  CHECK(u.frobenius() == 0.0);
}

TEST_CASE("alpha2 shift does not change the computed solution") {
  const Grid g = build_grid(3, Domain::UnitSquare);
  const DiscretizedPDE pde = assemble_heat(g);
  const DesiredState target = make_desired_state(DesiredStateKind::ConstantRank1, g, 6);
  SylvesterOperator plain = build_operator(pde, TimeGrid{1.0, 6}, 1e-2, target);
  SylvesterOperator shifted = build_operator(pde, TimeGrid{1.0, 6}, 1e-2, target);
  compute_alpha2(shifted);

  SolverConfig cfg;
  cfg.tol = 1e-6;
  const SolveResult rp = solve(plain, cfg);
  const SolveResult rs = solve(shifted, cfg);
  REQUIRE(rp.report.converged);
  REQUIRE(rs.report.converged);
  // Case i expands only along A1, whose spectrum the shift leaves untouched,
  // so both runs generate the same space and the same reduced solution.
  REQUIRE(rp.V.cols() == rs.V.cols());
  DenseMatrix xerr = matmul(rp.V, rp.Z);
  xerr -= matmul(rs.V, rs.Z);
  CHECK(xerr.frobenius() <= 1e-10 * (1.0 + matmul(rp.V, rp.Z).frobenius()));
}

TEST_CASE("truncation preserves the represented solution and caps the basis") {
  // n_T = 12 keeps the dimension cap out of reach for the first phase, so the
  // tiny threshold governs and the represented product must survive.
  const Bench b = make_bench(CaseTag::PartialObservation, 3, 12, 1e-2);
  SolverConfig cfg;
  cfg.tol = 1e-5;
  cfg.truncate = true;
  cfg.truncation_threshold = 1e-14;

  KrylovState st = initialize(b.op, cfg);
  for (int it = 0; it < 4; ++it) {
    auto [s1, s2] = next_shifts(st, b.op, cfg);
    expand_basis(st, b.op, cfg, s1, s2);
  }
  solve_reduced(st, b.op);
  const DenseMatrix before = matmul(st.V, st.Z);
  const int p_before = st.p();
  REQUIRE(p_before <= 12);
  truncate_basis(st, b.op, cfg);
  CHECK(st.p() <= p_before);
  CHECK(st.p() >= 1);
  DenseMatrix after = matmul(st.V, st.Z);
  after -= before;
  CHECK(after.frobenius() <= 1e-12 * (1.0 + before.frobenius()));
  CHECK(max_offdiag_identity_gap(st.V) <= 1e-10);

  // Grown past n_T, the dimension cap binds regardless of the threshold.
  for (int it = 0; it < 5; ++it) {
    auto [s1, s2] = next_shifts(st, b.op, cfg);
    expand_basis(st, b.op, cfg, s1, s2);
  }
  if (st.p() > 12) {
    solve_reduced(st, b.op);
    truncate_basis(st, b.op, cfg);
    CHECK(st.p() <= 12);
  }

  // Aggressive threshold keeps only the dominant direction.
  solve_reduced(st, b.op);
  SolverConfig hard = cfg;
  hard.truncation_threshold = 0.999999;
  truncate_basis(st, b.op, hard);
  CHECK(st.p() == 1);
}

TEST_CASE("truncated and untruncated runs agree on the benchmark outcome") {
  // Truncation caps the basis at n_T, so the bench needs enough time steps
  // for the capped run to still hold the solution content.
  const Bench b = make_bench(CaseTag::PartialObservation, 3, 16, 1e-2);
  SolverConfig plain;
  plain.tol = 1e-4;
  const SolveResult full = solve(b.op, plain);
  REQUIRE(full.report.converged);

  SolverConfig trunc = plain;
  trunc.truncate = true;
  trunc.truncation_threshold = 1e-12;
  const SolveResult cut = solve(b.op, trunc);
  REQUIRE(cut.report.converged);
  CHECK(cut.report.basis_size <= full.report.basis_size);
  CHECK(cut.report.history.back().norms.worst() <= trunc.tol);
}

TEST_CASE("single-direction recipe is rejected for boundary control") {
  const Bench b = make_bench(CaseTag::BoundaryControl, 2, 4, 1e-2);
  SolverConfig cfg;
  cfg.single_direction = true;
  CHECK_THROWS_AS(solve(b.op, cfg), ConfigError);
}

TEST_CASE("iteration cap reports an unconverged best effort") {
  const Bench b = make_bench(CaseTag::FullObservationDistributed, 3, 10, 1e-4);
  SolverConfig cfg;
  cfg.tol = 1e-8;
  cfg.max_iterations = 1;
  const SolveResult res = solve(b.op, cfg);
  CHECK(!res.report.converged);
  CHECK(res.report.iterations == 1);
  CHECK(!res.report.message.empty());
  CHECK(res.Z.rows() == res.V.cols());
}
