#include "rksylv/oracle.hpp"

#include <stdexcept>

#include "rksylv/errors.hpp"
#include "rksylv/linalg.hpp"

namespace rksylv {

SparseMatrix assemble_full(const SylvesterOperator& op, std::vector<double>& rhs) {
  const int n = op.n;
  const int n_T = op.time.n_T;
  const double tau = op.tau();
  if (static_cast<long long>(n) * n_T > 500000)
    throw SizeGuardError("assemble_full: n * n_T exceeds the direct-solve guard of 500000");

  const int half = n * n_T;
  const int dim = 2 * half;
  std::vector<Triplet> trip;
  trip.reserve((2 * op.K.nnz() + 6 * static_cast<std::size_t>(n)) * n_T + op.NMbNt.nnz() * n_T);

  auto push_block = [&trip](int row0, int col0, const SparseMatrix& m, double scale) {
    const auto& rp = m.row_ptr();
    const auto& ci = m.col_idx();
    const auto& v = m.values();
    for (int i = 0; i < m.rows(); ++i)
      for (int k = rp[i]; k < rp[i + 1]; ++k)
        trip.push_back({row0 + i, col0 + ci[k], scale * v[k]});
  };
  auto push_diag = [&trip](int row0, int col0, const std::vector<double>& d, double scale) {
    for (int i = 0; i < static_cast<int>(d.size()); ++i)
      if (d[i] != 0.0) trip.push_back({row0 + i, col0 + i, scale * d[i]});
  };

  for (int t = 0; t < n_T; ++t) {
    const int yt = t * n;
    const int lt = half + t * n;
    // (1,1): tau M1 per step.
    push_diag(yt, yt, op.M1diag, tau);
    // (1,2): tau K^T per step plus C^T x M (M on the diagonal step and on the
    // step above, from the adjoint difference).
    push_block(yt, lt, op.Kt, tau);
    push_diag(yt, lt, op.Mdiag, 1.0);
    if (t + 1 < n_T) push_diag(yt, lt + n, op.Mdiag, -1.0);
    // (2,1): tau K plus C x M.
    push_block(lt, yt, op.K, tau);
    push_diag(lt, yt, op.Mdiag, 1.0);
    if (t > 0) push_diag(lt, yt - n, op.Mdiag, -1.0);
    // (2,2): -(tau/beta) N Mb^{-1} N^T per step.
    push_block(lt, lt, op.NMbNt, -tau / op.beta);
  }

  rhs.assign(dim, 0.0);
  for (int t = 0; t < n_T; ++t)
    for (int j = 0; j < op.r(); ++j) {
      const double w = tau * op.Y2(t, j);
      if (w == 0.0) continue;
      auto y1 = op.Y1.col(j);
      for (int i = 0; i < n; ++i) rhs[t * n + i] += w * op.M1diag[i] * y1[i];
    }
  return SparseMatrix::from_triplets(dim, dim, std::move(trip));
}

OracleSolution solve_full(const SylvesterOperator& op) {
  std::vector<double> rhs;
  const SparseMatrix s = assemble_full(op, rhs);
  SparseFactorization fac(s, false);
  fac.solve_inplace(rhs);

  const int n = op.n;
  const int n_T = op.time.n_T;
  OracleSolution out;
  out.X = DenseMatrix(n, 2 * n_T);
  for (int t = 0; t < n_T; ++t)
    for (int i = 0; i < n; ++i) {
      out.X(i, t) = rhs[t * n + i];
      out.X(i, n_T + t) = rhs[n * n_T + t * n + i];
    }

  // U = (1/beta) Mb^{-1} N^T Lambda.
  out.U = DenseMatrix(op.N.cols(), n_T);
  for (int t = 0; t < n_T; ++t) {
    std::vector<double> lam(out.X.col(n_T + t).begin(), out.X.col(n_T + t).end());
    std::vector<double> u = op.MbinvNt.matvec(lam);
    auto dst = out.U.col(t);
    for (std::size_t i = 0; i < u.size(); ++i) dst[i] = u[i] / op.beta;
  }
  return out;
}

double objective(const SylvesterOperator& op, const DenseMatrix& y, const DenseMatrix& u) {
  const int n_T = op.time.n_T;
  if (y.rows() != op.n || y.cols() != n_T) throw std::invalid_argument("objective: Y shape");
  if (u.rows() != op.N.cols() || u.cols() != n_T) throw std::invalid_argument("objective: U shape");
  const double tau = op.tau();
  double j = 0.0;
  for (int t = 0; t < n_T; ++t) {
    auto yt = y.col(t);
    for (int i = 0; i < op.n; ++i) {
      double yhat = 0.0;
      for (int k = 0; k < op.r(); ++k) yhat += op.Y1(i, k) * op.Y2(t, k);
      const double d = yt[i] - yhat;
      j += 0.5 * tau * op.M1diag[i] * d * d;
    }
    auto ut = u.col(t);
    for (int i = 0; i < u.rows(); ++i) j += 0.5 * tau * op.beta * op.Mbdiag[i] * ut[i] * ut[i];
  }
  return j;
}

}  // namespace rksylv
