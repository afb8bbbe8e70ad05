#include "rksylv/operator.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "rksylv/errors.hpp"
#include "rksylv/linalg.hpp"

namespace rksylv {

namespace {

void axpy(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

}  // namespace

DenseMatrix RightCoefficients::apply_C1(const DenseMatrix& x) const {
  DenseMatrix out(x.rows(), x.cols());
  for (int t = 0; t < n_T; ++t) {
    auto dst = out.col(t);
    axpy(1.0 / tau, x.col(t), dst);
    if (t > 0) axpy(-1.0 / tau, x.col(t - 1), dst);
  }
  for (int t = 0; t < n_T; ++t) {
    auto dst = out.col(n_T + t);
    axpy(1.0 / tau, x.col(n_T + t), dst);
    if (t + 1 < n_T) axpy(-1.0 / tau, x.col(n_T + t + 1), dst);
    if (alpha2 != 0.0) axpy(-alpha2, x.col(t), dst);
  }
  return out;
}

DenseMatrix RightCoefficients::apply_I0(const DenseMatrix& x) const {
  DenseMatrix out(x.rows(), x.cols());
  for (int t = 0; t < n_T; ++t) {
    auto dst = out.col(n_T + t);
    axpy(1.0, x.col(t), dst);
  }
  return out;
}

DenseMatrix RightCoefficients::apply_D(const DenseMatrix& x) const {
  DenseMatrix out(x.rows(), x.cols());
  for (int t = 0; t < n_T; ++t) {
    auto dst = out.col(t);
    axpy(-1.0 / beta, x.col(n_T + t), dst);
  }
  return out;
}

DenseMatrix RightCoefficients::apply_E1(const DenseMatrix& x) const {
  DenseMatrix out = x;
  for (int t = 0; t < n_T; ++t) {
    auto dst = out.col(t);
    axpy(alpha3 / beta, x.col(n_T + t), dst);
  }
  return out;
}

std::vector<RightCoefficients::Entry> RightCoefficients::entries_C1() const {
  std::vector<Entry> e;
  e.reserve(4 * n_T);
  for (int t = 0; t < n_T; ++t) {
    e.push_back({t, t, 1.0 / tau});
    if (t > 0) e.push_back({t - 1, t, -1.0 / tau});
  }
  for (int t = 0; t < n_T; ++t) {
    e.push_back({n_T + t, n_T + t, 1.0 / tau});
    if (t + 1 < n_T) e.push_back({n_T + t + 1, n_T + t, -1.0 / tau});
    if (alpha2 != 0.0) e.push_back({t, n_T + t, -alpha2});
  }
  return e;
}

std::vector<RightCoefficients::Entry> RightCoefficients::entries_I0() const {
  std::vector<Entry> e;
  e.reserve(n_T);
  for (int t = 0; t < n_T; ++t) e.push_back({t, n_T + t, 1.0});
  return e;
}

std::vector<RightCoefficients::Entry> RightCoefficients::entries_D() const {
  std::vector<Entry> e;
  e.reserve(n_T);
  for (int t = 0; t < n_T; ++t) e.push_back({n_T + t, t, -1.0 / beta});
  return e;
}

std::vector<RightCoefficients::Entry> RightCoefficients::entries_E1() const {
  std::vector<Entry> e = entries_identity();
  for (int t = 0; t < n_T; ++t) e.push_back({n_T + t, t, alpha3 / beta});
  return e;
}

std::vector<RightCoefficients::Entry> RightCoefficients::entries_identity() const {
  std::vector<Entry> e;
  e.reserve(2 * n_T);
  for (int s = 0; s < 2 * n_T; ++s) e.push_back({s, s, 1.0});
  return e;
}

std::vector<RightCoefficients::Entry> RightCoefficients::entries_PY() const {
  std::vector<Entry> e;
  for (int t = 0; t < n_T; ++t) e.push_back({t, t, 1.0});
  return e;
}

std::vector<RightCoefficients::Entry> RightCoefficients::entries_PL() const {
  std::vector<Entry> e;
  for (int t = 0; t < n_T; ++t) e.push_back({n_T + t, n_T + t, 1.0});
  return e;
}

std::vector<double> SylvesterOperator::apply_A3(std::span<const double> x) const {
  if (a3_factored) {
    std::vector<double> w = MbinvNt.matvec(x);
    return MinvN.matvec(w);
  }
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = A3diag[i] * x[i];
  return y;
}

SylvesterOperator build_operator(const DiscretizedPDE& pde, const TimeGrid& time, double beta,
                                 const DesiredState& target) {
  const int n = static_cast<int>(pde.M.size());
  if (time.n_T < 1) throw ConfigError("build_operator: n_T must be positive");
  if (!(time.T > 0.0)) throw ConfigError("build_operator: T must be positive");
  if (!(beta > 0.0)) throw ConfigError("build_operator: beta must be positive");
  if (pde.K.rows() != n || pde.K.cols() != n) throw ConfigError("build_operator: K shape mismatch");
  if (static_cast<int>(pde.M1.size()) != n) throw ConfigError("build_operator: M1 size mismatch");
  if (pde.N.rows() != n) throw ConfigError("build_operator: N row count mismatch");
  if (pde.N.cols() != static_cast<int>(pde.Mb.size()))
    throw ConfigError("build_operator: Mb size does not match N");
  if (target.Y1.rows() != n) throw ConfigError("build_operator: Y1 rows must match grid");
  if (target.Y2.rows() != time.n_T) throw ConfigError("build_operator: Y2 rows must match time grid");
  if (target.Y1.cols() != target.Y2.cols()) throw ConfigError("build_operator: target ranks differ");
  for (double m : pde.M)
    if (!(m > 0.0)) throw ConfigError("build_operator: M must be positive definite");
  for (double m : pde.Mb)
    if (!(m > 0.0)) throw ConfigError("build_operator: Mb must be positive definite");

  bool partial = false;
  for (int i = 0; i < n; ++i)
    if (pde.M1[i] != pde.M[i]) partial = true;
  const bool boundary = pde.N.cols() != n;
  const bool nonsym = !pde.symmetric_K;
  if (partial + boundary + nonsym > 1)
    throw ConfigError("build_operator: combined partial observation / boundary control / "
                      "nonsymmetric stiffness is unsupported");

  SylvesterOperator op;
  op.tag = nonsym     ? CaseTag::NonsymmetricK
           : boundary ? CaseTag::BoundaryControl
           : partial  ? CaseTag::PartialObservation
                      : CaseTag::FullObservationDistributed;
  op.n = n;
  op.time = time;
  op.beta = beta;
  op.K = pde.K;
  op.Kt = pde.K.transposed();
  op.Mdiag = pde.M;
  op.M1diag = pde.M1;
  op.N = pde.N;
  op.Mbdiag = pde.Mb;
  op.control_nodes = pde.control_nodes;

  std::vector<double> minv(n), mbinv(pde.Mb.size());
  for (int i = 0; i < n; ++i) minv[i] = 1.0 / pde.M[i];
  for (std::size_t i = 0; i < pde.Mb.size(); ++i) mbinv[i] = 1.0 / pde.Mb[i];

  op.A1 = pde.K;
  op.A1.scale_rows(minv);
  if (nonsym) {
    op.A1t = op.Kt;
    op.A1t.scale_rows(minv);
  }
  op.A2diag.resize(n);
  for (int i = 0; i < n; ++i) op.A2diag[i] = pde.M1[i] * minv[i];

  op.MinvN = pde.N;
  op.MinvN.scale_rows(minv);
  op.MbinvNt = pde.N.transposed();
  op.MbinvNt.scale_rows(mbinv);
  op.NMbNt = pde.N.multiply(op.MbinvNt);
  op.a3_factored = boundary;
  if (!boundary) {
    // The control Gram matrix must be diagonal here (N = diag(M)).
    if (op.NMbNt.nnz() > static_cast<std::size_t>(n))
      throw ConfigError("build_operator: non-diagonal control coupling without boundary control");
    op.A3diag.resize(n);
    const auto diag = op.NMbNt.diagonal();
    for (int i = 0; i < n; ++i) op.A3diag[i] = diag[i] * minv[i];
  }

  op.Y1 = target.Y1;
  op.Y2 = target.Y2;
  op.F1 = target.Y1;
  for (int j = 0; j < op.F1.cols(); ++j) {
    auto c = op.F1.col(j);
    for (int i = 0; i < n; ++i) c[i] *= op.A2diag[i];
  }

  op.normK = op.K.frobenius();
  op.normM = norm2(op.Mdiag);
  op.normM1 = norm2(op.M1diag);
  op.normNMbNt = op.NMbNt.frobenius();
  op.normC = std::sqrt(2.0 * time.n_T - 1.0);
  const DenseMatrix g1 = matmul_tn(op.Y1, op.Y1);
  const DenseMatrix g2 = matmul_tn(op.Y2, op.Y2);
  op.normYhat = std::sqrt(std::max(0.0, trace_product_nt(g1, g2)));
  return op;
}

void compute_alpha2(SylvesterOperator& op) {
  if (op.tag == CaseTag::BoundaryControl)
    throw std::logic_error("compute_alpha2: not defined for boundary control");
  if (op.alpha2 != 0.0) throw std::logic_error("compute_alpha2: shift already applied");
  std::mt19937 gen(20240909u);
  std::normal_distribution<double> dist;
  std::vector<double> x(op.n);
  for (double& v : x) v = dist(gen);
  double nrm = norm2(x);
  for (double& v : x) v /= nrm;
  double lambda = 0.0;
  std::vector<double> y(op.n);
  for (int it = 0; it < 20; ++it) {
    op.A1.matvec(x, y);
    lambda = norm2(y);
    if (lambda == 0.0) break;
    for (int i = 0; i < op.n; ++i) x[i] = y[i] / lambda;
  }
  op.alpha2 = lambda;
  for (double& v : op.A2diag) v += lambda;
}

void compute_alpha3(SylvesterOperator& op) {
  if (op.tag != CaseTag::BoundaryControl)
    throw std::logic_error("compute_alpha3: only defined for boundary control");
  const double a3_norm = op.MinvN.multiply(op.MbinvNt).frobenius();
  op.alpha3 = a3_norm / (std::sqrt(op.beta) * op.A1.frobenius());
}

DenseMatrix apply_operator(const SylvesterOperator& op, const DenseMatrix& x, bool include_rhs) {
  const int n_T = op.time.n_T;
  if (x.rows() != op.n || x.cols() != 2 * n_T)
    throw std::invalid_argument("apply_operator: X must be n x 2 n_T");
  const RightCoefficients rc = op.right();
  DenseMatrix result = rc.apply_C1(x);

  std::vector<double> work(op.n);
  if (op.tag == CaseTag::NonsymmetricK) {
    for (int t = 0; t < n_T; ++t) {
      op.A1.matvec(x.col(t), work);
      axpy(1.0, work, result.col(t));
      op.A1t.matvec(x.col(n_T + t), work);
      axpy(1.0, work, result.col(n_T + t));
    }
  } else {
    const DenseMatrix xe = op.tag == CaseTag::BoundaryControl ? rc.apply_E1(x) : x;
    for (int c = 0; c < 2 * n_T; ++c) {
      op.A1.matvec(xe.col(c), work);
      axpy(1.0, work, result.col(c));
    }
  }

  for (int t = 0; t < n_T; ++t) {
    auto dst = result.col(n_T + t);
    auto src = x.col(t);
    for (int i = 0; i < op.n; ++i) dst[i] += op.A2diag[i] * src[i];
  }

  std::vector<double> xd(op.n);
  for (int t = 0; t < n_T; ++t) {
    auto lam = x.col(n_T + t);
    for (int i = 0; i < op.n; ++i) xd[i] = -lam[i] / op.beta;
    std::vector<double> y = op.apply_A3(xd);
    axpy(1.0, y, result.col(t));
    if (op.tag == CaseTag::BoundaryControl && op.alpha3 != 0.0) {
      op.A1.matvec(xd, work);
      axpy(op.alpha3, work, result.col(t));
    }
  }

  if (include_rhs)
    for (int t = 0; t < n_T; ++t)
      for (int j = 0; j < op.r(); ++j) axpy(-op.Y2(t, j), op.F1.col(j), result.col(n_T + t));
  return result;
}

}  // namespace rksylv
