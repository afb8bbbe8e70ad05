#include "rksylv/linalg.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <cmath>
#include <stdexcept>

#include "rksylv/errors.hpp"

namespace rksylv {

namespace {

Eigen::SparseMatrix<double> to_eigen(const SparseMatrix& a) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(a.nnz());
  const auto& rp = a.row_ptr();
  const auto& ci = a.col_idx();
  const auto& v = a.values();
  for (int i = 0; i < a.rows(); ++i)
    for (int k = rp[i]; k < rp[i + 1]; ++k) trip.emplace_back(i, ci[k], v[k]);
  Eigen::SparseMatrix<double> m(a.rows(), a.cols());
  m.setFromTriplets(trip.begin(), trip.end());
  m.makeCompressed();
  return m;
}

Eigen::Map<const Eigen::MatrixXd> as_eigen(const DenseMatrix& m) {
  return {m.data(), m.rows(), m.cols()};
}

}  // namespace

struct SparseFactorization::Impl {
  std::optional<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> ldlt;
  std::optional<Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>>> lu;
  std::size_t bytes = 0;
};

SparseFactorization::SparseFactorization(const SparseMatrix& a, bool symmetric)
    : impl_(std::make_unique<Impl>()), n_(a.rows()) {
  if (a.rows() != a.cols()) throw std::invalid_argument("SparseFactorization: matrix not square");
  Eigen::SparseMatrix<double> m = to_eigen(a);
  if (symmetric) {
    impl_->ldlt.emplace();
    impl_->ldlt->compute(m);
    if (impl_->ldlt->info() != Eigen::Success)
      throw SingularMatrixError("SparseFactorization: LDLT pivot breakdown");
    const auto& d = impl_->ldlt->vectorD();
    for (int i = 0; i < d.size(); ++i)
      if (d[i] == 0.0 || !std::isfinite(d[i]))
        throw SingularMatrixError("SparseFactorization: zero pivot in LDLT");
    impl_->bytes = sizeof(double) * (impl_->ldlt->matrixL().nestedExpression().nonZeros() + n_);
  } else {
    impl_->lu.emplace();
    impl_->lu->compute(m);
    if (impl_->lu->info() != Eigen::Success)
      throw SingularMatrixError("SparseFactorization: LU pivot breakdown");
    impl_->bytes = sizeof(double) * static_cast<std::size_t>(impl_->lu->nnzL() + impl_->lu->nnzU());
  }
}

SparseFactorization::~SparseFactorization() = default;
SparseFactorization::SparseFactorization(SparseFactorization&&) noexcept = default;
SparseFactorization& SparseFactorization::operator=(SparseFactorization&&) noexcept = default;

void SparseFactorization::solve_inplace(std::span<double> b) const {
  if (b.size() != static_cast<std::size_t>(n_)) throw std::invalid_argument("solve: length mismatch");
  Eigen::Map<Eigen::VectorXd> x(b.data(), n_);
  Eigen::VectorXd rhs = x;
  if (impl_->ldlt)
    x = impl_->ldlt->solve(rhs);
  else
    x = impl_->lu->solve(rhs);
  for (double v : b)
    if (!std::isfinite(v)) throw SingularMatrixError("SparseFactorization: non-finite solve result");
}

std::vector<double> SparseFactorization::solve(std::span<const double> b) const {
  std::vector<double> x(b.begin(), b.end());
  solve_inplace(x);
  return x;
}

DenseMatrix SparseFactorization::solve(const DenseMatrix& b) const {
  DenseMatrix x = b;
  for (int j = 0; j < x.cols(); ++j) solve_inplace(x.col(j));
  return x;
}

std::size_t SparseFactorization::memory_bytes() const { return impl_->bytes; }

std::vector<double> dense_solve(const DenseMatrix& a, std::span<const double> b) {
  if (a.rows() != a.cols()) throw std::invalid_argument("dense_solve: matrix not square");
  if (b.size() != static_cast<std::size_t>(a.rows())) throw std::invalid_argument("dense_solve: length mismatch");
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(as_eigen(a));
  const auto& diag = lu.matrixLU().diagonal();
  for (int i = 0; i < diag.size(); ++i)
    if (std::abs(diag[i]) <= 1e-300) throw SingularMatrixError("dense_solve: zero pivot");
  std::vector<double> x(b.size());
  Eigen::Map<Eigen::VectorXd>(x.data(), x.size()) =
      lu.solve(Eigen::Map<const Eigen::VectorXd>(b.data(), b.size()));
  for (double v : x)
    if (!std::isfinite(v)) throw SingularMatrixError("dense_solve: non-finite result");
  return x;
}

SvdResult dense_svd(const DenseMatrix& a) {
  const int k = std::min(a.rows(), a.cols());
  SvdResult out;
  out.u = DenseMatrix(a.rows(), k);
  out.vt = DenseMatrix(k, a.cols());
  out.sigma.resize(k);
  const auto flags = Eigen::ComputeThinU | Eigen::ComputeThinV;
  Eigen::MatrixXd u, v;
  Eigen::VectorXd s;
  if (std::max(a.rows(), a.cols()) > 500) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(as_eigen(a), flags);
    u = svd.matrixU();
    v = svd.matrixV();
    s = svd.singularValues();
  } else {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(as_eigen(a), flags);
    u = svd.matrixU();
    v = svd.matrixV();
    s = svd.singularValues();
  }
  Eigen::Map<Eigen::MatrixXd>(out.u.data(), a.rows(), k) = u;
  Eigen::Map<Eigen::MatrixXd>(out.vt.data(), k, a.cols()) = v.transpose();
  std::copy(s.data(), s.data() + k, out.sigma.begin());
  return out;
}

GramSchmidtResult gram_schmidt_append(const DenseMatrix& v_basis, std::span<const double> w) {
  const int p = v_basis.cols();
  if (p > 0 && v_basis.rows() != static_cast<int>(w.size()))
    throw std::invalid_argument("gram_schmidt_append: length mismatch");
  GramSchmidtResult out;
  out.h.assign(p, 0.0);
  std::vector<double> v(w.begin(), w.end());
  const double w_norm = norm2(w);
  for (int pass = 0; pass < 2 && p > 0; ++pass) {
    std::vector<double> c = matvec_t(v_basis, v);
    for (int j = 0; j < p; ++j) out.h[j] += c[j];
    std::vector<double> corr = matvec(v_basis, c);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= corr[i];
  }
  out.norm_after = norm2(v);
  out.breakdown = out.norm_after <= 1e-12 * w_norm;
  if (!out.breakdown) {
    for (double& x : v) x /= out.norm_after;
    out.v = std::move(v);
  }
  return out;
}

std::vector<std::complex<double>> dense_eigenvalues(const DenseMatrix& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("dense_eigenvalues: matrix not square");
  Eigen::EigenSolver<Eigen::MatrixXd> es(as_eigen(a), false);
  if (es.info() != Eigen::Success) throw std::runtime_error("dense_eigenvalues: iteration failed");
  std::vector<std::complex<double>> out(a.rows());
  for (int i = 0; i < a.rows(); ++i) out[i] = es.eigenvalues()[i];
  return out;
}

std::vector<std::complex<double>> generalized_eigenvalues(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows())
    throw std::invalid_argument("generalized_eigenvalues: shape mismatch");
  Eigen::GeneralizedEigenSolver<Eigen::MatrixXd> ges(as_eigen(a), as_eigen(b), false);
  if (ges.info() != Eigen::Success) throw std::runtime_error("generalized_eigenvalues: iteration failed");
  const auto alphas = ges.alphas();
  const auto betas = ges.betas();
  double beta_scale = 0.0;
  for (int i = 0; i < betas.size(); ++i) beta_scale = std::max(beta_scale, std::abs(betas[i]));
  std::vector<std::complex<double>> out;
  for (int i = 0; i < alphas.size(); ++i)
    if (std::abs(betas[i]) > 1e-12 * beta_scale && betas[i] != 0.0)
      out.push_back(alphas[i] / betas[i]);
  return out;
}

double trace_product_nt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("trace_product_nt: shape mismatch");
  double s = 0.0;
  const double* pa = a.data();
  const double* pb = b.data();
  const std::size_t len = static_cast<std::size_t>(a.rows()) * a.cols();
  for (std::size_t i = 0; i < len; ++i) s += pa[i] * pb[i];
  return s;
}

}  // namespace rksylv
