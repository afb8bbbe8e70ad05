#pragma once

#include <limits>
#include <string>
#include <vector>

#include "rksylv/config.hpp"
#include "rksylv/solver.hpp"

namespace rksylv {

// One row of report.csv: the resolved problem axes plus the solve outcome.
struct RunRow {
  std::string case_name;
  int level = 0;
  int n = 0;
  int n_T = 0;
  int n0 = 0;
  double beta = 0.0;
  double eps = 0.0;
  std::string truncation;
  SolveReport report;
  double err_oracle = std::numeric_limits<double>::quiet_NaN();
  bool failed = false;
  std::string error;
};

// Cross product of the sweep axes in the fixed order
// level, n_T, beta, eps, mask_first, truncation.
std::vector<RunConfig> expand_sweep(const RunConfig& config);

// Builds and solves one resolved cell; mode "both" also runs the direct
// reference solve and records the relative error against it.
RunRow execute_cell(const RunConfig& cell);

void write_report_csv(const std::string& path, const std::vector<RunRow>& rows);
void write_convergence_csv(const std::string& path, const SolveReport& report);

// Dispatches on config.mode, writes the outputs under config.out and returns
// the process exit code: 0 success, 2 finished without convergence, 1 error.
int run_command(const RunConfig& config);

}  // namespace rksylv
