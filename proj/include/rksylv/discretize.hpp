#pragma once

#include <span>
#include <string>
#include <vector>

#include "rksylv/dense_matrix.hpp"
#include "rksylv/sparse_matrix.hpp"

namespace rksylv {

enum class Domain { UnitSquare, CenteredSquare };

// Uniform Q1 grid on a square domain with m = 2^level cells per side and
// (m+1)^2 nodes, ordered row by row from the lower-left corner.
struct Grid {
  Domain domain = Domain::UnitSquare;
  int level = 0;
  int m = 0;
  int n = 0;
  double h = 0.0;
  double origin = 0.0;
  double side = 0.0;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<bool> is_boundary;
  std::vector<int> boundary_nodes;

  int node(int ix, int iy) const { return iy * (m + 1) + ix; }
};

Grid build_grid(int level, Domain domain, int max_level = 10);

// Space discretization of one PDE together with the control coupling.
// M and M1 are lumped (diagonal) mass matrices; for distributed control
// N = diag(M) and Mb = M, otherwise N holds the control-node mass columns.
struct DiscretizedPDE {
  SparseMatrix K;
  std::vector<double> M;
  std::vector<double> M1;
  SparseMatrix N;
  std::vector<double> Mb;
  std::vector<int> control_nodes;  // column -> node index
  bool symmetric_K = true;
  double eps = 0.0;                // diffusion coefficient; 0 marks pure heat
};

// Heat equation on the unit square with homogeneous Dirichlet boundary:
// boundary rows and columns of K are cleared and K(b,b) = M(b,b), so all
// (m+1)^2 nodes are retained and K stays symmetric.
DiscretizedPDE assemble_heat(const Grid& grid);

// Convection-diffusion with the recirculating wind
// v(x, y) = (2y(1-x^2), -2x(1-y^2)) on [-1,1]^2, streamline-diffusion
// stabilized; convection and stabilization use 3x3 Gauss quadrature.
DiscretizedPDE assemble_convection_diffusion(const Grid& grid, double eps);

// Zero the observation mass on the given nodes (partial observation).
DiscretizedPDE apply_observation_mask(DiscretizedPDE pde, std::span<const int> unobserved);

// Restrict the control to the Dirichlet boundary ring: N keeps one mass
// column per boundary node and Mb its diagonal block.
DiscretizedPDE restrict_control_to_boundary(DiscretizedPDE pde, const Grid& grid);

// Desired state in factored form, yhat = Y1 * Y2^T with Y1 n x r, Y2 n_T x r.
struct DesiredState {
  DenseMatrix Y1;
  DenseMatrix Y2;
  int rank() const { return Y1.cols(); }
};

enum class DesiredStateKind { ConstantRank1, Rank6Modes };

DesiredState make_desired_state(DesiredStateKind kind, const Grid& grid, int n_T);
DesiredState load_desired_state(const std::string& y1_path, const std::string& y2_path, int n, int n_T);

}  // namespace rksylv
