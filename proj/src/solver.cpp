#include "rksylv/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <deque>
#include <limits>
#include <sstream>

#include "rksylv/errors.hpp"
#include "rksylv/linalg.hpp"

namespace rksylv {

namespace {

enum class Recipe { Single, TwoDiag, TwoBoundary, TwoTranspose };

Recipe recipe_for(const SylvesterOperator& op, const SolverConfig& config) {
  if (config.single_direction) {
    if (op.tag == CaseTag::BoundaryControl)
      throw ConfigError("single-direction recipe is not admissible with boundary control");
    return Recipe::Single;
  }
  switch (op.tag) {
    case CaseTag::FullObservationDistributed: return Recipe::Single;
    case CaseTag::PartialObservation: return Recipe::TwoDiag;
    case CaseTag::BoundaryControl: return Recipe::TwoBoundary;
    case CaseTag::NonsymmetricK: return Recipe::TwoTranspose;
  }
  throw std::logic_error("recipe_for: unreachable");
}

bool two_direction(Recipe r) { return r != Recipe::Single; }

// Bounded store of shifted-system factorizations; shifts rarely repeat, so a
// handful of slots suffices.
class ShiftedSolves {
 public:
  explicit ShiftedSolves(const SylvesterOperator& op) : op_(&op) {}

  std::vector<double> solve(int direction, double s, std::span<const double> v) {
    std::vector<double> rhs(op_->n);
    for (int i = 0; i < op_->n; ++i) rhs[i] = op_->Mdiag[i] * v[i];
    factorization(direction, s).solve_inplace(rhs);
    return rhs;
  }

  std::size_t bytes() const {
    std::size_t b = 0;
    for (const auto& slot : slots_) b += slot.fac.memory_bytes();
    return b;
  }

 private:
  const SparseFactorization& factorization(int direction, double s) {
    for (const auto& slot : slots_)
      if (slot.direction == direction && slot.s == s) return slot.fac;
    SparseMatrix p = shifted_matrix(direction, s);
    const bool symmetric = op_->tag != CaseTag::NonsymmetricK;
    slots_.push_back({direction, s, SparseFactorization(p, symmetric)});
    if (slots_.size() > 4) slots_.pop_front();
    return slots_.back().fac;
  }

  SparseMatrix shifted_matrix(int direction, double s) const {
    if (op_->tag == CaseTag::BoundaryControl) {
      // (A1 + s (A3 + alpha3 A1))^{-1} and ((A3 + alpha3 A1) + s A1)^{-1}
      // pulled back through M: aK + b N Mb^{-1} N^T.
      const double a = direction == 1 ? 1.0 + s * op_->alpha3 : op_->alpha3 + s;
      const double b = direction == 1 ? s : 1.0;
      std::vector<Triplet> entries;
      entries.reserve(op_->K.nnz() + op_->NMbNt.nnz());
      auto push = [&entries](const SparseMatrix& m, double scale) {
        const auto& rp = m.row_ptr();
        const auto& ci = m.col_idx();
        const auto& vv = m.values();
        for (int i = 0; i < m.rows(); ++i)
          for (int k = rp[i]; k < rp[i + 1]; ++k) entries.push_back({i, ci[k], scale * vv[k]});
      };
      push(op_->K, a);
      push(op_->NMbNt, b);
      return SparseMatrix::from_triplets(op_->n, op_->n, std::move(entries));
    }
    // (A1 + s I)^{-1} resp. (M^{-1}K^T + s I)^{-1} pulled back through M.
    const SparseMatrix& base = direction == 1 ? op_->K : op_->Kt;
    return scaled_plus_diag(base, 1.0, op_->Mdiag, s);
  }

  struct Slot {
    int direction;
    double s;
    SparseFactorization fac;
  };

  const SylvesterOperator* op_;
  std::deque<Slot> slots_;
};

DenseMatrix grow_square(const DenseMatrix& a, std::span<const double> new_col,
                        std::span<const double> new_row, double corner) {
  const int p = a.rows();
  DenseMatrix out(p + 1, p + 1);
  for (int j = 0; j < p; ++j)
    for (int i = 0; i < p; ++i) out(i, j) = a(i, j);
  for (int i = 0; i < p; ++i) out(i, p) = new_col[i];
  for (int j = 0; j < p; ++j) out(p, j) = new_row[j];
  out(p, p) = corner;
  return out;
}

DenseMatrix append_row(const DenseMatrix& a, std::span<const double> row) {
  DenseMatrix out(a.rows() + 1, a.cols());
  for (int j = 0; j < a.cols(); ++j) {
    for (int i = 0; i < a.rows(); ++i) out(i, j) = a(i, j);
    out(a.rows(), j) = row[j];
  }
  return out;
}

std::vector<double> apply_A2(const SylvesterOperator& op, std::span<const double> v) {
  std::vector<double> w(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) w[i] = op.A2diag[i] * v[i];
  return w;
}

// Appends one accepted direction: basis column, product caches, projections
// and residual trackers all grow by one.
bool append_direction(KrylovState& st, const SylvesterOperator& op, std::span<const double> w) {
  GramSchmidtResult gs = gram_schmidt_append(st.V, w);
  if (gs.breakdown) {
    ++st.breakdowns;
    return false;
  }
  const std::vector<double>& v = gs.v;
  const int p = st.p();

  std::vector<double> u1 = op.A1.matvec(v);
  std::vector<double> u3 = op.apply_A3(v);
  std::vector<double> u2 = apply_A2(op, v);
  std::vector<double> col(p), row(p);

  for (int i = 0; i < p; ++i) col[i] = dot(st.V.col(i), u1);
  for (int j = 0; j < p; ++j) row[j] = dot(v, st.W1.col(j));
  st.A1r = grow_square(st.A1r, col, row, dot(v, u1));

  for (int i = 0; i < p; ++i) col[i] = dot(st.V.col(i), u3);
  for (int j = 0; j < p; ++j) row[j] = dot(v, st.W3.col(j));
  st.A3r = grow_square(st.A3r, col, row, dot(v, u3));

  // A2 is diagonal, so its projection is symmetric.
  for (int i = 0; i < p; ++i) col[i] = dot(st.V.col(i), u2);
  st.A2r = grow_square(st.A2r, col, col, dot(v, u2));

  std::vector<double> u1t;
  if (op.tag == CaseTag::NonsymmetricK) {
    u1t = op.A1t.matvec(v);
    for (int i = 0; i < p; ++i) col[i] = dot(st.V.col(i), u1t);
    for (int j = 0; j < p; ++j) row[j] = dot(v, st.W1t.col(j));
    st.A1tr = grow_square(st.A1tr, col, row, dot(v, u1t));
  }

  std::vector<double> f1row(op.r());
  for (int j = 0; j < op.r(); ++j) f1row[j] = dot(v, op.F1.col(j));
  st.F1r = append_row(st.F1r, f1row);

  st.adjoint->append_basis_vector(v);
  st.state_eq->append_basis_vector(v);

  st.V.append_col(v);
  st.W1.append_col(u1);
  st.W3.append_col(u3);
  if (op.tag == CaseTag::NonsymmetricK) st.W1t.append_col(u1t);
  st.latest = v;
  return true;
}

// Log-objective shift selection: maximize prod |t - theta| / prod |t + s|
// over 200 log-spaced candidates between the Ritz extremes. The interval is
// deliberately not clipped from below: the all-at-once time coupling C/tau
// has eigenvalues down to about 1/T, so slow temporal modes pair the spatial
// operator with nearly zero shift and the bottom of the spectrum stays live.
double select_shift(const std::vector<std::complex<double>>& ritz,
                    const std::vector<double>& history) {
  if (ritz.empty()) return 1.0;
  double tmin = std::numeric_limits<double>::infinity();
  double tmax = -std::numeric_limits<double>::infinity();
  for (const auto& th : ritz) {
    tmin = std::min(tmin, th.real());
    tmax = std::max(tmax, th.real());
  }
  if (!(tmax > 0.0)) return std::max(1e-8, std::abs(tmax));
  const double lo = std::max(tmin, 1e-8 * tmax);
  const double hi = tmax;
  const double mid = 0.5 * (tmin + tmax);
  if (!(lo > 0.0) || lo >= hi) return mid;

  constexpr int kCandidates = 200;
  double best_t = mid;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < kCandidates; ++j) {
    const double t = lo * std::pow(hi / lo, static_cast<double>(j) / (kCandidates - 1));
    double score = 0.0;
    bool degenerate = false;
    for (const auto& th : ritz) {
      const double d = std::abs(std::complex<double>(t, 0.0) - th);
      if (d == 0.0) {
        degenerate = true;
        break;
      }
      score += std::log(d);
    }
    if (degenerate) continue;
    for (double s : history) {
      const double d = std::abs(t + s);
      if (d == 0.0) {
        degenerate = true;
        break;
      }
      score -= std::log(d);
    }
    if (degenerate) continue;
    if (score > best_score) {
      best_score = score;
      best_t = t;
    }
  }
  if (!std::isfinite(best_score)) return mid;
  return best_t;
}

// Log-midpoint of the widest gap in the union of Ritz values and used
// shifts, clipped to the Ritz hull. Equidistributes poles over the interval
// on a log scale, one hole at a time.
double widest_gap_shift(const std::vector<std::complex<double>>& ritz,
                        const std::vector<double>& history) {
  std::vector<double> pts;
  pts.reserve(ritz.size() + history.size());
  double tmin = std::numeric_limits<double>::infinity();
  double tmax = -std::numeric_limits<double>::infinity();
  for (const auto& th : ritz) {
    tmin = std::min(tmin, th.real());
    tmax = std::max(tmax, th.real());
  }
  if (!(tmax > 0.0)) return std::max(1e-8, std::abs(tmax));
  const double lo = std::max(tmin, 1e-8 * tmax);
  if (!(lo > 0.0) || lo >= tmax) return tmax;
  for (const auto& th : ritz)
    if (th.real() >= lo && th.real() <= tmax) pts.push_back(th.real());
  for (double s : history)
    if (s >= lo && s <= tmax) pts.push_back(s);
  pts.push_back(lo);
  pts.push_back(tmax);
  std::sort(pts.begin(), pts.end());
  double best = 0.0;
  double at = std::sqrt(lo * tmax);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (pts[i - 1] <= 0.0) continue;
    const double gap = std::log(pts[i] / pts[i - 1]);
    if (gap > best) {
      best = gap;
      at = std::sqrt(pts[i] * pts[i - 1]);
    }
  }
  return at;
}

std::size_t tracker_bytes(const ResidualFactors& rf) {
  std::size_t b = static_cast<std::size_t>(rf.q().rows()) * rf.q().cols() * sizeof(double);
  b += static_cast<std::size_t>(rf.left_cols()) * rf.left_cols() / 2 * sizeof(double);
  return b;
}

std::size_t state_bytes(const KrylovState& st) {
  auto dense = [](const DenseMatrix& m) {
    return static_cast<std::size_t>(m.rows()) * m.cols() * sizeof(double);
  };
  std::size_t b = dense(st.V) + dense(st.W1) + dense(st.W1t) + dense(st.W3) + dense(st.Z) +
                  dense(st.A1r) + dense(st.A1tr) + dense(st.A2r) + dense(st.A3r) + dense(st.F1r);
  b += st.latest.size() * sizeof(double);
  if (st.adjoint) b += tracker_bytes(*st.adjoint);
  if (st.state_eq) b += tracker_bytes(*st.state_eq);
  return b;
}

int rank_of(const DenseMatrix& z) {
  if (z.rows() == 0 || z.cols() == 0) return 0;
  const SvdResult svd = dense_svd(z);
  if (svd.sigma.empty() || svd.sigma[0] == 0.0) return 0;
  int r = 0;
  for (double s : svd.sigma)
    if (s >= 1e-10 * svd.sigma[0]) ++r;
  return r;
}

}  // namespace

void SolverConfig::validate() const {
  if (!(tol >= 1e-8 && tol < 1.0))
    throw ConfigError(
        "solver tolerance must lie in [1e-8, 1): the factored residual updates accumulate "
        "round-off of about 1e-8 and cannot certify tighter stopping");
  if (max_iterations < 1) throw ConfigError("max_iterations must be positive");
  if (truncate && !(truncation_threshold > 0.0 && truncation_threshold < 1.0))
    throw ConfigError("truncation threshold must lie in (0, 1)");
}

KrylovState initialize(const SylvesterOperator& op, const SolverConfig& config) {
  config.validate();
  KrylovState st;
  st.V = DenseMatrix(op.n, 0);
  st.W1 = DenseMatrix(op.n, 0);
  st.W1t = DenseMatrix(op.n, 0);
  st.W3 = DenseMatrix(op.n, 0);
  st.A1r = DenseMatrix(0, 0);
  st.A1tr = DenseMatrix(0, 0);
  st.A2r = DenseMatrix(0, 0);
  st.A3r = DenseMatrix(0, 0);
  st.F1r = DenseMatrix(0, op.r());
  st.Z = DenseMatrix(0, 2 * op.time.n_T);
  st.adjoint = std::make_unique<ResidualFactors>(op, EquationSide::Adjoint);
  st.state_eq = std::make_unique<ResidualFactors>(op, EquationSide::State);
  for (int j = 0; j < op.F1.cols(); ++j) append_direction(st, op, op.F1.col(j));
  return st;
}

std::pair<double, double> next_shifts(KrylovState& state, const SylvesterOperator& op,
                                      const SolverConfig& config) {
  const Recipe recipe = recipe_for(op, config);
  if (op.tag == CaseTag::BoundaryControl) {
    // Pencil units: the first direction's resolvent diverges at generalized
    // eigenvalues of (A1, A3 + alpha3 A1), the second at their reciprocals,
    // so each keeps its own pool and history.
    DenseMatrix a3eff = state.A3r;
    if (op.alpha3 != 0.0) {
      DenseMatrix scaled = state.A1r;
      scaled *= op.alpha3;
      a3eff += scaled;
    }
    const double s1 = select_shift(generalized_eigenvalues(state.A1r, a3eff), state.shifts1);
    state.shifts1.push_back(s1);
    const double s2 = select_shift(generalized_eigenvalues(a3eff, state.A1r), state.shifts2);
    state.shifts2.push_back(s2);
    return {s1, s2};
  }
  // The alpha2 transform packs the secondary spectrum into A1's interval, so
  // one Ritz pool (the projection of A1 onto the whole generated space) and
  // one shift history serve both directions.
  //
  // Two-direction chains alternate the greedy pick with the widest uncovered
  // spectral hole. The greedy reward never collapses over a true spectral
  // gap of A1, so left alone it parks every pole at one end of the interval
  // while the coupled equation still carries residual content at the other;
  // the interleaved hole-filling keeps the nested products spectrally broad.
  // Single-direction chains stay purely greedy: there the resolved Ritz
  // values mirror the resolved solution content and the objective
  // self-limits.
  const char* sm = std::getenv("RK_SHIFT");
  const bool pure_greedy = sm && std::atoi(sm) == 1;
  const std::vector<std::complex<double>> ritz = dense_eigenvalues(state.A1r);
  std::vector<double> history = state.shifts1;
  history.insert(history.end(), state.shifts2.begin(), state.shifts2.end());
  const bool fill_turn =
      !pure_greedy && two_direction(recipe) && state.shifts1.size() % 2 == 1;
  const double s1 =
      fill_turn ? widest_gap_shift(ritz, history) : select_shift(ritz, history);
  state.shifts1.push_back(s1);
  double s2 = 0.0;
  if (two_direction(recipe)) {
    history.push_back(s1);
    s2 = pure_greedy ? select_shift(ritz, history) : widest_gap_shift(ritz, history);
    state.shifts2.push_back(s2);
  }
  return {s1, s2};
}

int expand_basis(KrylovState& state, const SylvesterOperator& op, const SolverConfig& config,
                 double s1, double s2) {
  const Recipe recipe = recipe_for(op, config);
  const std::vector<double> v = state.latest;  // copy: appends move `latest`
  ShiftedSolves solves(op);
  int added = 0;

  const char* mc = std::getenv("RK_CHAIN");
  const int mode = mc ? std::atoi(mc) : 0;

  std::vector<double> w1 = solves.solve(1, s1, v);
  const bool chained = append_direction(state, op, w1);
  if (chained) ++added;
  // The rational chain advances through the first direction only: the next
  // iteration must see nested products (A1+s_k)^{-1}...(A1+s_1)^{-1}F1.
  // Secondary vectors enrich the space but never drive the recursion.
  const std::vector<double> chain = state.latest;

  if (two_direction(recipe)) {
    const std::vector<double>& src = (mode == 2 || mode == 3) && chained ? chain : v;
    if (recipe == Recipe::TwoDiag) {
      std::vector<double> w2(src.size());
      for (std::size_t i = 0; i < src.size(); ++i) w2[i] = src[i] / (op.A2diag[i] + s2);
      if (append_direction(state, op, w2)) ++added;
    } else {
      std::vector<double> w2 = solves.solve(2, s2, src);
      if (append_direction(state, op, w2)) ++added;
    }
    if (chained && mode != 1 && mode != 3) state.latest = chain;
  }
  state.expand_bytes = std::max(state.expand_bytes, solves.bytes());
  return added;
}

// Removes the most recently appended direction: caches shrink to principal
// blocks, trackers are rebuilt against the shorter basis.
void drop_last_direction(KrylovState& state, const SylvesterOperator& op) {
  const int p = state.p() - 1;
  if (p < 0) return;
  state.V = state.V.cols(0, p);
  state.W1 = state.W1.cols(0, p);
  state.W3 = state.W3.cols(0, p);
  if (op.tag == CaseTag::NonsymmetricK) state.W1t = state.W1t.cols(0, p);
  const auto shrink = [p](const DenseMatrix& m) {
    DenseMatrix out(p, p);
    for (int j = 0; j < p; ++j)
      for (int i = 0; i < p; ++i) out(i, j) = m(i, j);
    return out;
  };
  state.A1r = shrink(state.A1r);
  state.A2r = shrink(state.A2r);
  state.A3r = shrink(state.A3r);
  if (op.tag == CaseTag::NonsymmetricK) state.A1tr = shrink(state.A1tr);
  state.F1r = matmul_tn(state.V, op.F1);
  state.adjoint = std::make_unique<ResidualFactors>(op, EquationSide::Adjoint);
  state.state_eq = std::make_unique<ResidualFactors>(op, EquationSide::State);
  for (int j = 0; j < p; ++j) {
    state.adjoint->append_basis_vector(state.V.col(j));
    state.state_eq->append_basis_vector(state.V.col(j));
  }
}

void solve_reduced(KrylovState& state, const SylvesterOperator& op) {
  const int p = state.p();
  const int n_T = op.time.n_T;
  state.Z = DenseMatrix(p, 2 * n_T);
  if (p == 0) return;

  const RightCoefficients rc = op.right();
  const DenseMatrix ip = DenseMatrix::identity(p);
  DenseMatrix a3eff;

  std::vector<std::pair<const DenseMatrix*, std::vector<RightCoefficients::Entry>>> terms;
  terms.emplace_back(&ip, rc.entries_C1());
  terms.emplace_back(&state.A2r, rc.entries_I0());
  if (op.tag == CaseTag::NonsymmetricK) {
    terms.emplace_back(&state.A1r, rc.entries_PY());
    terms.emplace_back(&state.A1tr, rc.entries_PL());
    terms.emplace_back(&state.A3r, rc.entries_D());
  } else if (op.tag == CaseTag::BoundaryControl) {
    a3eff = state.A3r;
    if (op.alpha3 != 0.0) {
      DenseMatrix scaled = state.A1r;
      scaled *= op.alpha3;
      a3eff += scaled;
    }
    terms.emplace_back(&state.A1r, rc.entries_E1());
    terms.emplace_back(&a3eff, rc.entries_D());
  } else {
    terms.emplace_back(&state.A1r, rc.entries_identity());
    terms.emplace_back(&state.A3r, rc.entries_D());
  }

  std::size_t est = 0;
  for (const auto& [mat, entries] : terms) est += entries.size() * p * p;
  std::vector<Triplet> triplets;
  triplets.reserve(est);
  for (const auto& [mat, entries] : terms)
    for (const auto& e : entries)
      for (int j = 0; j < p; ++j) {
        const int col0 = e.row * p;
        const int row0 = e.col * p;
        for (int i = 0; i < p; ++i) {
          const double val = e.value * (*mat)(i, j);
          if (val != 0.0) triplets.push_back({row0 + i, col0 + j, val});
        }
      }

  const int dim = 2 * n_T * p;
  SparseMatrix s = SparseMatrix::from_triplets(dim, dim, std::move(triplets));
  std::vector<double> rhs(dim, 0.0);
  for (int t = 0; t < n_T; ++t)
    for (int j = 0; j < op.r(); ++j) {
      const double w = op.Y2(t, j);
      if (w == 0.0) continue;
      for (int i = 0; i < p; ++i) rhs[(n_T + t) * p + i] += w * state.F1r(i, j);
    }

  SparseFactorization fac(s, false);
  state.reduced_bytes = fac.memory_bytes() + s.nnz() * (sizeof(double) + sizeof(int));
  fac.solve_inplace(rhs);
  for (int c = 0; c < 2 * n_T; ++c)
    for (int i = 0; i < p; ++i) state.Z(i, c) = rhs[c * p + i];
}

void truncate_basis(KrylovState& state, const SylvesterOperator& op, const SolverConfig& config) {
  const int p = state.p();
  if (!config.truncate || p == 0) return;
  const SvdResult svd = dense_svd(state.Z);
  if (svd.sigma.empty() || svd.sigma[0] == 0.0) return;
  int keep = 0;
  for (double sv : svd.sigma)
    if (sv >= config.truncation_threshold * svd.sigma[0]) ++keep;
  keep = std::max(keep, 1);
  keep = std::min({keep, p, op.time.n_T});
  if (keep >= p) return;

  const DenseMatrix u = svd.u.cols(0, keep);
  state.V = matmul(state.V, u);
  state.Z = DenseMatrix(keep, 2 * op.time.n_T);
  for (int i = 0; i < keep; ++i)
    for (int c = 0; c < 2 * op.time.n_T; ++c) state.Z(i, c) = svd.sigma[i] * svd.vt(i, c);

  // Projections and trackers are rebuilt from scratch against the rotated
  // basis; incremental updates would compound the rotation error.
  state.W1 = op.A1.multiply_dense(state.V);
  state.A1r = matmul_tn(state.V, state.W1);
  state.W3 = DenseMatrix(op.n, 0);
  for (int j = 0; j < keep; ++j) state.W3.append_col(op.apply_A3(state.V.col(j)));
  state.A3r = matmul_tn(state.V, state.W3);
  DenseMatrix w2(op.n, 0);
  for (int j = 0; j < keep; ++j) w2.append_col(apply_A2(op, state.V.col(j)));
  state.A2r = matmul_tn(state.V, w2);
  if (op.tag == CaseTag::NonsymmetricK) {
    state.W1t = op.A1t.multiply_dense(state.V);
    state.A1tr = matmul_tn(state.V, state.W1t);
  }
  state.F1r = matmul_tn(state.V, op.F1);
  state.adjoint = std::make_unique<ResidualFactors>(op, EquationSide::Adjoint);
  state.state_eq = std::make_unique<ResidualFactors>(op, EquationSide::State);
  for (int j = 0; j < keep; ++j) {
    state.adjoint->append_basis_vector(state.V.col(j));
    state.state_eq->append_basis_vector(state.V.col(j));
  }
}

SolveResult solve(const SylvesterOperator& op, const SolverConfig& config,
                  const std::function<void(const KrylovState&, const IterationRecord&)>& observer) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  KrylovState state = initialize(op, config);
  SolveReport report;
  report.max_basis_size = state.p();

  if (state.p() == 0) {
    // A zero right-hand side leaves no directions and certifies X = 0.
    const ResidualNorms norms = residual_norms(*state.adjoint, *state.state_eq, state.Z, op);
    report.converged = stopping_check(norms, config.tol);
    if (!report.converged) report.message = "right-hand side produced no subspace directions";
  }

  ResidualNorms norms;
  double best = std::numeric_limits<double>::infinity();
  int stall_streak = 0;
  const char* abv = std::getenv("RK_AB");
  const bool ab_split = abv && std::atoi(abv) == 1;
  while (!report.converged && state.p() > 0 && report.iterations < config.max_iterations) {
    const int p_before = state.p();
    const auto [s1, s2] = next_shifts(state, op, config);
    expand_basis(state, op, config, s1, s2);
    solve_reduced(state, op);
    norms = residual_norms(*state.adjoint, *state.state_eq, state.Z, op);

    if (ab_split && state.p() == p_before + 2) {
      const auto split_span = state.V.col(state.p() - 1);
      const std::vector<double> split(split_span.begin(), split_span.end());
      const std::vector<double> latest_keep = state.latest;
      drop_last_direction(state, op);
      solve_reduced(state, op);
      const ResidualNorms without = residual_norms(*state.adjoint, *state.state_eq, state.Z, op);
      if (without.worst() < norms.worst()) {
        norms = without;
        const auto tail = state.V.col(state.p() - 1);
        state.latest.assign(tail.begin(), tail.end());
      } else {
        append_direction(state, op, split);
        solve_reduced(state, op);
        state.latest = latest_keep;
      }
    }

    ++report.iterations;
    IterationRecord rec{report.iterations, state.p(), norms, s1, s2};
    report.history.push_back(rec);
    report.max_basis_size = std::max(report.max_basis_size, state.p());
    report.peak_bytes =
        std::max(report.peak_bytes, state_bytes(state) + state.reduced_bytes + state.expand_bytes);
    if (observer) observer(state, rec);

    if (stopping_check(norms, config.tol)) {
      report.converged = true;
      break;
    }

    const double current = norms.worst();
    const bool no_growth = state.p() <= p_before;
    const bool little_progress = !(current < 0.99 * best);
    if (no_growth && little_progress)
      ++stall_streak;
    else
      stall_streak = 0;
    best = std::min(best, current);
    if (stall_streak >= 3) {
      report.stagnated = true;
      std::ostringstream msg;
      msg << "stagnated after " << report.iterations << " iterations at basis size " << state.p()
          << " (residuals " << norms.r1 << ", " << norms.r2 << ", " << norms.rho3
          << "); the subspace recipe cannot reduce the residual further";
      report.message = msg.str();
      break;
    }

    truncate_basis(state, op, config);
  }

  if (!report.converged && !report.stagnated && report.message.empty())
    report.message = "iteration cap reached before the stopping test was met";

  report.basis_size = state.p();
  report.solution_rank = rank_of(state.Z);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(state.V), std::move(state.Z), std::move(report)};
}

SolutionFactors recover_solution(const DenseMatrix& v_basis, const DenseMatrix& z,
                                 const SylvesterOperator& op) {
  const int n_T = op.time.n_T;
  SolutionFactors out;
  out.basis = v_basis;
  out.Zy = z.cols(0, n_T);
  out.Zl = z.cols(n_T, n_T);
  out.Ul = op.MbinvNt.multiply_dense(v_basis);
  out.Ul *= 1.0 / op.beta;
  return out;
}

}  // namespace rksylv
