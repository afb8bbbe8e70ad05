#include "rksylv/discretize.hpp"

#include <cmath>
#include <stdexcept>

#include "rksylv/errors.hpp"
#include "rksylv/matrix_market.hpp"

namespace rksylv {

namespace {

// Local node order cycles around the cell: (0,0), (1,0), (1,1), (0,1), so
// locals 0-2 and 1-3 are the diagonally opposite pairs.
constexpr int kLocalDx[4] = {0, 1, 1, 0};
constexpr int kLocalDy[4] = {0, 0, 1, 1};

// Q1 stiffness on a square cell; independent of the cell size.
constexpr double kStiffness[4][4] = {
    {4.0 / 6, -1.0 / 6, -2.0 / 6, -1.0 / 6},
    {-1.0 / 6, 4.0 / 6, -1.0 / 6, -2.0 / 6},
    {-2.0 / 6, -1.0 / 6, 4.0 / 6, -1.0 / 6},
    {-1.0 / 6, -2.0 / 6, -1.0 / 6, 4.0 / 6},
};

void apply_dirichlet(SparseMatrix& k_mat, const std::vector<double>& m_diag, const Grid& grid,
                     std::vector<Triplet>& entries) {
  // Clear boundary rows and columns, then pin the boundary diagonal to the
  // lumped mass so K stays nonsingular and scaling-consistent with M.
  std::vector<Triplet> kept;
  kept.reserve(entries.size());
  for (const Triplet& t : entries)
    if (!grid.is_boundary[t.row] && !grid.is_boundary[t.col]) kept.push_back(t);
  for (int b : grid.boundary_nodes) kept.push_back({b, b, m_diag[b]});
  k_mat = SparseMatrix::from_triplets(grid.n, grid.n, std::move(kept));
}

std::vector<double> lumped_mass(const Grid& grid) {
  std::vector<double> m(grid.n, 0.0);
  const double quarter = grid.h * grid.h / 4.0;
  for (int cy = 0; cy < grid.m; ++cy)
    for (int cx = 0; cx < grid.m; ++cx)
      for (int l = 0; l < 4; ++l) m[grid.node(cx + kLocalDx[l], cy + kLocalDy[l])] += quarter;
  return m;
}

SparseMatrix distributed_control(const std::vector<double>& m_diag) {
  return SparseMatrix::from_diagonal(m_diag);
}

}  // namespace

Grid build_grid(int level, Domain domain, int max_level) {
  if (level < 1) throw std::invalid_argument("build_grid: level must be at least 1");
  if (level > max_level)
    throw SizeGuardError("build_grid: level " + std::to_string(level) + " exceeds cap " +
                         std::to_string(max_level));
  Grid g;
  g.domain = domain;
  g.level = level;
  g.m = 1 << level;
  g.n = (g.m + 1) * (g.m + 1);
  g.origin = domain == Domain::UnitSquare ? 0.0 : -1.0;
  g.side = domain == Domain::UnitSquare ? 1.0 : 2.0;
  g.h = g.side / g.m;
  g.x.resize(g.n);
  g.y.resize(g.n);
  g.is_boundary.assign(g.n, false);
  for (int iy = 0; iy <= g.m; ++iy)
    for (int ix = 0; ix <= g.m; ++ix) {
      const int i = g.node(ix, iy);
      g.x[i] = g.origin + ix * g.h;
      g.y[i] = g.origin + iy * g.h;
      if (ix == 0 || ix == g.m || iy == 0 || iy == g.m) {
        g.is_boundary[i] = true;
        g.boundary_nodes.push_back(i);
      }
    }
  return g;
}

DiscretizedPDE assemble_heat(const Grid& grid) {
  DiscretizedPDE pde;
  pde.M = lumped_mass(grid);
  pde.M1 = pde.M;

  std::vector<Triplet> entries;
  entries.reserve(static_cast<std::size_t>(grid.m) * grid.m * 16);
  for (int cy = 0; cy < grid.m; ++cy)
    for (int cx = 0; cx < grid.m; ++cx) {
      int nodes[4];
      for (int l = 0; l < 4; ++l) nodes[l] = grid.node(cx + kLocalDx[l], cy + kLocalDy[l]);
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) entries.push_back({nodes[a], nodes[b], kStiffness[a][b]});
    }
  apply_dirichlet(pde.K, pde.M, grid, entries);

  pde.N = distributed_control(pde.M);
  pde.Mb = pde.M;
  pde.control_nodes.resize(grid.n);
  for (int i = 0; i < grid.n; ++i) pde.control_nodes[i] = i;
  pde.symmetric_K = true;
  return pde;
}

DiscretizedPDE assemble_convection_diffusion(const Grid& grid, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("assemble_convection_diffusion: eps must be positive");
  if (grid.domain != Domain::CenteredSquare)
    throw std::invalid_argument("assemble_convection_diffusion: wind is defined on [-1,1]^2");

  DiscretizedPDE pde;
  pde.M = lumped_mass(grid);
  pde.M1 = pde.M;
  pde.eps = eps;
  pde.symmetric_K = false;

  const double h = grid.h;
  // 3-point Gauss rule on [-1,1].
  const double gp[3] = {-std::sqrt(3.0 / 5.0), 0.0, std::sqrt(3.0 / 5.0)};
  const double gw[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};

  auto wind = [](double x, double y, double& wx, double& wy) {
    wx = 2.0 * y * (1.0 - x * x);
    wy = -2.0 * x * (1.0 - y * y);
  };

  std::vector<Triplet> entries;
  entries.reserve(static_cast<std::size_t>(grid.m) * grid.m * 16);
  for (int cy = 0; cy < grid.m; ++cy)
    for (int cx = 0; cx < grid.m; ++cx) {
      int nodes[4];
      for (int l = 0; l < 4; ++l) nodes[l] = grid.node(cx + kLocalDx[l], cy + kLocalDy[l]);
      const double x0 = grid.origin + cx * h;
      const double y0 = grid.origin + cy * h;

      double wx_c, wy_c;
      wind(x0 + h / 2, y0 + h / 2, wx_c, wy_c);
      const double wnorm = std::hypot(wx_c, wy_c);
      double delta = 0.0;
      if (wnorm > 0.0) {
        const double peclet = wnorm * h / (2.0 * eps);
        if (peclet > 1.0) delta = (h / (2.0 * wnorm)) * (1.0 - 1.0 / peclet);
      }

      double local[4][4] = {};
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) local[a][b] = eps * kStiffness[a][b];

      for (int qx = 0; qx < 3; ++qx)
        for (int qy = 0; qy < 3; ++qy) {
          const double xi = gp[qx], eta = gp[qy];
          const double wq = gw[qx] * gw[qy] * (h / 2) * (h / 2);
          const double x = x0 + h * (xi + 1) / 2;
          const double y = y0 + h * (eta + 1) / 2;
          double wx, wy;
          wind(x, y, wx, wy);
          // Reference basis at (xi, eta), locals ordered as kLocalDx/Dy.
          const double phi[4] = {(1 - xi) * (1 - eta) / 4, (1 + xi) * (1 - eta) / 4,
                                 (1 + xi) * (1 + eta) / 4, (1 - xi) * (1 + eta) / 4};
          const double dxi[4] = {-(1 - eta) / 4, (1 - eta) / 4, (1 + eta) / 4, -(1 + eta) / 4};
          const double deta[4] = {-(1 - xi) / 4, -(1 + xi) / 4, (1 + xi) / 4, (1 - xi) / 4};
          double gradx[4], grady[4], conv[4];
          for (int l = 0; l < 4; ++l) {
            gradx[l] = dxi[l] * 2 / h;
            grady[l] = deta[l] * 2 / h;
            conv[l] = wx * gradx[l] + wy * grady[l];
          }
          for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
              local[a][b] += wq * (phi[a] * conv[b] + delta * conv[a] * conv[b]);
        }

      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) entries.push_back({nodes[a], nodes[b], local[a][b]});
    }
  apply_dirichlet(pde.K, pde.M, grid, entries);

  pde.N = distributed_control(pde.M);
  pde.Mb = pde.M;
  pde.control_nodes.resize(grid.n);
  for (int i = 0; i < grid.n; ++i) pde.control_nodes[i] = i;
  return pde;
}

DiscretizedPDE apply_observation_mask(DiscretizedPDE pde, std::span<const int> unobserved) {
  const int n = static_cast<int>(pde.M1.size());
  for (int i : unobserved) {
    if (i < 0 || i >= n) throw std::out_of_range("apply_observation_mask: node index outside grid");
    pde.M1[i] = 0.0;
  }
  return pde;
}

DiscretizedPDE restrict_control_to_boundary(DiscretizedPDE pde, const Grid& grid) {
  const int nb = static_cast<int>(grid.boundary_nodes.size());
  std::vector<Triplet> cols;
  cols.reserve(nb);
  pde.Mb.resize(nb);
  pde.control_nodes = grid.boundary_nodes;
  for (int j = 0; j < nb; ++j) {
    const int node = grid.boundary_nodes[j];
    cols.push_back({node, j, pde.M[node]});
    pde.Mb[j] = pde.M[node];
  }
  pde.N = SparseMatrix::from_triplets(grid.n, nb, std::move(cols));
  return pde;
}

DesiredState make_desired_state(DesiredStateKind kind, const Grid& grid, int n_T) {
  if (n_T < 1) throw std::invalid_argument("make_desired_state: n_T must be positive");
  DesiredState ys;
  if (kind == DesiredStateKind::ConstantRank1) {
    // Indicator of the centered square with half the side length (a quarter
    // of the domain area), constant in time.
    ys.Y1 = DenseMatrix(grid.n, 1);
    const double lo = grid.origin + grid.side / 4.0;
    const double hi = grid.origin + 3.0 * grid.side / 4.0;
    for (int i = 0; i < grid.n; ++i)
      if (grid.x[i] >= lo && grid.x[i] <= hi && grid.y[i] >= lo && grid.y[i] <= hi) ys.Y1(i, 0) = 1.0;
    ys.Y2 = DenseMatrix(n_T, 1);
    for (int t = 0; t < n_T; ++t) ys.Y2(t, 0) = 1.0;
  } else {
    constexpr int r = 6;
    if (n_T <= r)
      throw std::invalid_argument("make_desired_state: rank-6 target needs n_T > 6");
    static constexpr int freq[r][2] = {{1, 1}, {1, 2}, {2, 1}, {2, 2}, {1, 3}, {3, 1}};
    ys.Y1 = DenseMatrix(grid.n, r);
    constexpr double pi = 3.14159265358979323846;
    for (int i = 0; i < grid.n; ++i) {
      const double sx = (grid.x[i] - grid.origin) / grid.side;
      const double sy = (grid.y[i] - grid.origin) / grid.side;
      for (int j = 0; j < r; ++j)
        ys.Y1(i, j) = std::sin(freq[j][0] * pi * sx) * std::sin(freq[j][1] * pi * sy);
    }
    ys.Y2 = DenseMatrix(n_T, r);
    for (int t = 0; t < n_T; ++t) {
      const double s = static_cast<double>(t + 1) / n_T;
      ys.Y2(t, 0) = 1.0;
      ys.Y2(t, 1) = s;
      ys.Y2(t, 2) = s * s;
      ys.Y2(t, 3) = std::sin(2.0 * pi * s);
      ys.Y2(t, 4) = std::cos(2.0 * pi * s);
      ys.Y2(t, 5) = std::exp(-s);
    }
  }
  if (ys.rank() >= n_T)
    throw std::invalid_argument("make_desired_state: target rank must stay below n_T");
  return ys;
}

DesiredState load_desired_state(const std::string& y1_path, const std::string& y2_path, int n, int n_T) {
  DesiredState ys;
  ys.Y1 = read_dense_matrix_market(y1_path);
  ys.Y2 = read_dense_matrix_market(y2_path);
  if (ys.Y1.rows() != n) throw ConfigError("desired state: Y1 row count does not match grid");
  if (ys.Y2.rows() != n_T) throw ConfigError("desired state: Y2 row count does not match time grid");
  if (ys.Y1.cols() != ys.Y2.cols()) throw ConfigError("desired state: factor ranks differ");
  if (ys.Y1.cols() < 1) throw ConfigError("desired state: empty factors");
  if (ys.Y1.cols() >= n_T) throw ConfigError("desired state: rank must stay below n_T");
  return ys;
}

}  // namespace rksylv
