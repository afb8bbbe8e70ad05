#include "rksylv/residual.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "rksylv/linalg.hpp"

namespace rksylv {

ResidualFactors::ResidualFactors(const SylvesterOperator& op, EquationSide side)
    : op_(&op), side_(side), q_(op.n, 0) {
  if (side_ == EquationSide::Adjoint) {
    // Fixed right-hand-side block -tau M1 Y1, paired with rows of Y2^T.
    std::vector<double> c(op_->n);
    for (int j = 0; j < op_->r(); ++j) {
      auto y1 = op_->Y1.col(j);
      for (int i = 0; i < op_->n; ++i) c[i] = -op_->tau() * op_->M1diag[i] * y1[i];
      append_column(c);
    }
  }
}

void ResidualFactors::append_column(std::span<const double> c) {
  GramSchmidtResult gs = gram_schmidt_append(q_, c);
  std::vector<double> col = std::move(gs.h);
  if (!gs.breakdown) {
    q_.append_col(gs.v);
    col.push_back(gs.norm_after);
  }
  r_cols_.push_back(std::move(col));
}

void ResidualFactors::append_basis_vector(std::span<const double> v) {
  const int n = op_->n;
  const double tau = op_->tau();
  std::vector<double> c(n);
  if (side_ == EquationSide::Adjoint) {
    for (int i = 0; i < n; ++i) c[i] = tau * op_->M1diag[i] * v[i];
    append_column(c);
    op_->Kt.matvec(v, c);
    for (int i = 0; i < n; ++i) c[i] *= tau;
    append_column(c);
    for (int i = 0; i < n; ++i) c[i] = op_->Mdiag[i] * v[i];
    append_column(c);
  } else {
    op_->K.matvec(v, c);
    for (int i = 0; i < n; ++i) c[i] *= tau;
    append_column(c);
    for (int i = 0; i < n; ++i) c[i] = op_->Mdiag[i] * v[i];
    append_column(c);
    std::vector<double> w = op_->NMbNt.matvec(v);
    for (int i = 0; i < n; ++i) c[i] = (tau / op_->beta) * w[i];
    append_column(c);
  }
  ++p_;
}

DenseMatrix ResidualFactors::left_factor() const {
  DenseMatrix out(q_.rows(), left_cols());
  for (int j = 0; j < left_cols(); ++j) {
    const auto& col = r_cols_[j];
    auto dst = out.col(j);
    for (std::size_t k = 0; k < col.size(); ++k) {
      if (col[k] == 0.0) continue;
      auto qc = q_.col(static_cast<int>(k));
      for (int i = 0; i < q_.rows(); ++i) dst[i] += qc[i] * col[k];
    }
  }
  return out;
}

DenseMatrix ResidualFactors::right_rows(const DenseMatrix& z) const {
  const int n_T = op_->time.n_T;
  if (z.rows() != p_ || z.cols() != 2 * n_T)
    throw std::invalid_argument("right_rows: Z shape does not match tracked basis");
  DenseMatrix rows(left_cols(), n_T);
  int row = 0;
  if (side_ == EquationSide::Adjoint)
    for (int j = 0; j < op_->r(); ++j, ++row)
      for (int t = 0; t < n_T; ++t) rows(row, t) = op_->Y2(t, j);
  for (int k = 0; k < p_; ++k) {
    if (side_ == EquationSide::Adjoint) {
      for (int t = 0; t < n_T; ++t) rows(row, t) = z(k, t);
      ++row;
      for (int t = 0; t < n_T; ++t) rows(row, t) = z(k, n_T + t);
      ++row;
      // Row of Z_L C: difference toward the next step, plain at the last.
      for (int t = 0; t < n_T; ++t)
        rows(row, t) = z(k, n_T + t) - (t + 1 < n_T ? z(k, n_T + t + 1) : 0.0);
      ++row;
    } else {
      for (int t = 0; t < n_T; ++t) rows(row, t) = z(k, t);
      ++row;
      // Row of Z_Y C^T: difference toward the previous step.
      for (int t = 0; t < n_T; ++t) rows(row, t) = z(k, t) - (t > 0 ? z(k, t - 1) : 0.0);
      ++row;
      for (int t = 0; t < n_T; ++t) rows(row, t) = -z(k, n_T + t);
      ++row;
    }
  }
  return rows;
}

double ResidualFactors::norm(const DenseMatrix& z) const {
  const DenseMatrix rows = right_rows(z);
  const int n_T = rows.cols();
  const int q_eff = q_.cols();
  DenseMatrix w(q_eff, n_T);
  for (int j = 0; j < left_cols(); ++j) {
    const auto& col = r_cols_[j];
    for (int t = 0; t < n_T; ++t) {
      const double rv = rows(j, t);
      if (rv == 0.0) continue;
      auto dst = w.col(t);
      for (std::size_t i = 0; i < col.size(); ++i) dst[i] += col[i] * rv;
    }
  }
  return w.frobenius();
}

ResidualNorms residual_norms(const ResidualFactors& adjoint, const ResidualFactors& state,
                             const DenseMatrix& z, const SylvesterOperator& op) {
  ResidualNorms out;
  out.r1 = adjoint.norm(z);
  out.r2 = state.norm(z);

  const int n_T = op.time.n_T;
  const double zy = z.cols(0, n_T).frobenius();
  const double zl = z.cols(n_T, n_T).frobenius();
  const double tau = op.tau();
  const double den1 =
      tau * (op.normM1 * zy + op.normK * zl + op.normM1 * op.normYhat) + op.normM * zl * op.normC;
  const double den2 =
      tau * (op.normK * zy + op.normNMbNt * zl / op.beta) + op.normM * zy * op.normC;
  auto ratio = [](double num, double den) {
    if (den > 0.0) return num / den;
    return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  };
  out.rho3 = ratio(out.r1, den1) + ratio(out.r2, den2);
  return out;
}

bool stopping_check(const ResidualNorms& norms, double tol) { return norms.worst() <= tol; }

DenseMatrix dense_residual(const SylvesterOperator& op, const DenseMatrix& v_basis,
                           const DenseMatrix& z, EquationSide side) {
  const int n_T = op.time.n_T;
  const int n = op.n;
  const double tau = op.tau();
  const DenseMatrix y = matmul(v_basis, z.cols(0, n_T));
  const DenseMatrix l = matmul(v_basis, z.cols(n_T, n_T));
  DenseMatrix res(n, n_T);
  std::vector<double> w(n);
  if (side == EquationSide::Adjoint) {
    for (int t = 0; t < n_T; ++t) {
      auto dst = res.col(t);
      op.Kt.matvec(l.col(t), w);
      for (int i = 0; i < n; ++i) {
        double lc = l(i, t) - (t + 1 < n_T ? l(i, t + 1) : 0.0);
        double yhat = 0.0;
        for (int j = 0; j < op.r(); ++j) yhat += op.Y1(i, j) * op.Y2(t, j);
        dst[i] = tau * op.M1diag[i] * y(i, t) + tau * w[i] + op.Mdiag[i] * lc -
                 tau * op.M1diag[i] * yhat;
      }
    }
  } else {
    for (int t = 0; t < n_T; ++t) {
      auto dst = res.col(t);
      op.K.matvec(y.col(t), w);
      std::vector<double> nl = op.NMbNt.matvec(l.col(t));
      for (int i = 0; i < n; ++i) {
        double yc = y(i, t) - (t > 0 ? y(i, t - 1) : 0.0);
        dst[i] = tau * w[i] + op.Mdiag[i] * yc - (tau / op.beta) * nl[i];
      }
    }
  }
  return res;
}

}  // namespace rksylv
