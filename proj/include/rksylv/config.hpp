#pragma once

#include <map>
#include <string>
#include <vector>

#include "rksylv/operator.hpp"
#include "rksylv/solver.hpp"

namespace rksylv {

// One fully resolved run. Sweep axes expand into copies of this with the
// scalar fields overwritten per cell.
struct RunConfig {
  // [problem]
  std::string pde = "heat";                // heat | convection_diffusion
  int level = 5;
  double eps = 0.1;                        // convection_diffusion only
  std::string mask = "none";               // none | first:N | file:PATH
  bool boundary_control = false;
  std::string desired = "constant_rank1";  // constant_rank1 | rank6_modes | file:Y1,Y2
  double T = 1.0;
  int n_T = 100;
  double beta = 1e-4;

  // [solver]
  double tol = 1e-4;
  int max_iterations = 200;
  std::string truncation = "off";  // off | threshold
  double truncation_threshold = 1e-12;
  bool single_direction = false;

  // [run]
  std::string mode = "solve";  // solve | oracle | both | sweep
  std::string out = "out";
  int workers = 1;
  std::string export_solution = "none";  // none | factored | dense

  // [sweep] comma-separated axes; the cross product is executed in the fixed
  // order level, n_T, beta, eps, mask_first, truncation.
  std::vector<int> sweep_level;
  std::vector<int> sweep_n_T;
  std::vector<double> sweep_beta;
  std::vector<double> sweep_eps;
  std::vector<int> sweep_mask_first;
  std::vector<std::string> sweep_truncation;

  void validate() const;
  SolverConfig solver() const;
  // Unobserved node count implied by the mask (file masks are counted lazily).
  int mask_count() const;
};

// INI-style file: [section] headers, key = value lines, # or ; comments.
RunConfig parse_config_file(const std::string& path, const std::vector<std::string>& overrides = {});

// Defaults plus overrides only.
RunConfig parse_config_entries(const std::map<std::string, std::string>& entries);

// "section.key=value", applied on top of a parsed config.
void apply_override(RunConfig& config, const std::string& assignment);

// Grid, discretization, desired state and operator for one resolved config,
// including the per-case spectral shift.
SylvesterOperator build_from_config(const RunConfig& config);

}  // namespace rksylv
