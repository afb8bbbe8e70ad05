#include "rksylv/runner.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "rksylv/errors.hpp"
#include "rksylv/matrix_market.hpp"
#include "rksylv/oracle.hpp"

namespace rksylv {

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

std::string format_num(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string case_name(CaseTag tag) {
  switch (tag) {
    case CaseTag::FullObservationDistributed: return "full_observation";
    case CaseTag::PartialObservation: return "partial_observation";
    case CaseTag::BoundaryControl: return "boundary_control";
    case CaseTag::NonsymmetricK: return "nonsymmetric";
  }
  return "unknown";
}

void export_solution_files(const std::filesystem::path& dir, const RunConfig& cell,
                           const SolutionFactors& factors) {
  if (cell.export_solution == "factored") {
    write_matrix_market((dir / "y_left.mm").string(), factors.basis);
    write_matrix_market((dir / "y_right.mm").string(), factors.Zy);
    write_matrix_market((dir / "lambda_left.mm").string(), factors.basis);
    write_matrix_market((dir / "lambda_right.mm").string(), factors.Zl);
    write_matrix_market((dir / "u_left.mm").string(), factors.Ul);
    write_matrix_market((dir / "u_right.mm").string(), factors.Zl);
  } else if (cell.export_solution == "dense") {
    write_matrix_market((dir / "y.mm").string(), matmul(factors.basis, factors.Zy));
    write_matrix_market((dir / "lambda.mm").string(), matmul(factors.basis, factors.Zl));
    write_matrix_market((dir / "u.mm").string(), matmul(factors.Ul, factors.Zl));
  }
}

void export_oracle_files(const std::filesystem::path& dir, const SylvesterOperator& op,
                         const OracleSolution& oracle) {
  const int n_T = op.time.n_T;
  write_matrix_market((dir / "oracle_y.mm").string(), oracle.X.cols(0, n_T));
  write_matrix_market((dir / "oracle_lambda.mm").string(), oracle.X.cols(n_T, n_T));
  write_matrix_market((dir / "oracle_u.mm").string(), oracle.U);
}

}  // namespace

std::vector<RunConfig> expand_sweep(const RunConfig& config) {
  auto levels = config.sweep_level;
  auto nts = config.sweep_n_T;
  auto betas = config.sweep_beta;
  auto epss = config.sweep_eps;
  auto masks = config.sweep_mask_first;
  auto truncs = config.sweep_truncation;
  if (levels.empty()) levels = {config.level};
  if (nts.empty()) nts = {config.n_T};
  if (betas.empty()) betas = {config.beta};
  if (epss.empty()) epss = {config.eps};
  const bool mask_axis = !masks.empty();
  if (truncs.empty()) truncs = {config.truncation};

  std::vector<RunConfig> cells;
  for (int lvl : levels)
    for (int nt : nts)
      for (double b : betas)
        for (double e : epss)
          for (std::size_t mi = 0; mi < (mask_axis ? masks.size() : 1); ++mi)
            for (const auto& tr : truncs) {
              RunConfig cell = config;
              cell.mode = "solve";
              cell.level = lvl;
              cell.n_T = nt;
              cell.beta = b;
              cell.eps = e;
              if (mask_axis) cell.mask = "first:" + std::to_string(masks[mi]);
              cell.truncation = tr;
              cell.sweep_level.clear();
              cell.sweep_n_T.clear();
              cell.sweep_beta.clear();
              cell.sweep_eps.clear();
              cell.sweep_mask_first.clear();
              cell.sweep_truncation.clear();
              cells.push_back(std::move(cell));
            }
  return cells;
}

RunRow execute_cell(const RunConfig& cell) {
  RunRow row;
  row.level = cell.level;
  row.n_T = cell.n_T;
  row.beta = cell.beta;
  row.eps = cell.pde == "convection_diffusion" ? cell.eps : 0.0;
  row.truncation = cell.truncation;
  try {
    row.n0 = cell.mask_count();
    const SylvesterOperator op = build_from_config(cell);
    row.case_name = case_name(op.tag);
    row.n = op.n;
    SolveResult result = solve(op, cell.solver());
    row.report = std::move(result.report);

    const std::filesystem::path dir(cell.out);
    if (cell.export_solution != "none") {
      std::filesystem::create_directories(dir);
      export_solution_files(dir, cell, recover_solution(result.V, result.Z, op));
    }
    if (cell.mode == "both") {
      const OracleSolution oracle = solve_full(op);
      DenseMatrix diff = matmul(result.V, result.Z);
      diff -= oracle.X;
      const double denom = oracle.X.frobenius();
      row.err_oracle = denom > 0.0 ? diff.frobenius() / denom : diff.frobenius();
      if (cell.export_solution != "none") {
        std::filesystem::create_directories(dir);
        export_oracle_files(dir, op, oracle);
      }
    }
  } catch (const std::exception& e) {
    row.failed = true;
    row.error = e.what();
  }
  return row;
}

void write_report_csv(const std::string& path, const std::vector<RunRow>& rows) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "# rksylv report v1\n";
  os << "case,level,n,n_T,beta,eps,n0,truncation,iterations,basis,max_basis,rank,converged,"
        "stagnated,r1,r2,rho3,wall_s,memory_mb,err_oracle,status\n";
  for (const RunRow& row : rows) {
    const ResidualNorms last =
        row.report.history.empty() ? ResidualNorms{} : row.report.history.back().norms;
    os << csv_field(row.case_name) << ',' << row.level << ',' << row.n << ',' << row.n_T << ','
       << format_num(row.beta) << ',' << format_num(row.eps) << ',' << row.n0 << ','
       << csv_field(row.truncation) << ',' << row.report.iterations << ',' << row.report.basis_size
       << ',' << row.report.max_basis_size << ',' << row.report.solution_rank << ','
       << (row.report.converged ? 1 : 0) << ',' << (row.report.stagnated ? 1 : 0) << ','
       << format_num(last.r1) << ',' << format_num(last.r2) << ',' << format_num(last.rho3) << ','
       << format_num(row.report.wall_seconds) << ','
       << format_num(static_cast<double>(row.report.peak_bytes) / (1024.0 * 1024.0)) << ','
       << format_num(row.err_oracle) << ','
       << csv_field(row.failed ? ("error: " + row.error) : row.report.message) << '\n';
  }
}

void write_convergence_csv(const std::string& path, const SolveReport& report) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "# rksylv convergence v1\n";
  os << "iteration,basis_size,r1,r2,rho3,shift1,shift2\n";
  for (const IterationRecord& rec : report.history)
    os << rec.iteration << ',' << rec.basis_size << ',' << format_num(rec.norms.r1) << ','
       << format_num(rec.norms.r2) << ',' << format_num(rec.norms.rho3) << ','
       << format_num(rec.shift1) << ',' << format_num(rec.shift2) << '\n';
}

int run_command(const RunConfig& config) {
  config.validate();
  const std::filesystem::path dir(config.out);
  std::filesystem::create_directories(dir);

  if (config.mode == "oracle") {
    const SylvesterOperator op = build_from_config(config);
    const OracleSolution oracle = solve_full(op);
    export_oracle_files(dir, op, oracle);
    return 0;
  }

  std::vector<RunRow> rows;
  if (config.mode == "sweep") {
    const std::vector<RunConfig> cells = expand_sweep(config);
    rows.resize(cells.size());
    const int workers = std::min<int>(config.workers, static_cast<int>(cells.size()));
    if (workers <= 1) {
      for (std::size_t i = 0; i < cells.size(); ++i) rows[i] = execute_cell(cells[i]);
    } else {
      std::mutex m;
      std::size_t next = 0;
      auto work = [&]() {
        for (;;) {
          std::size_t i;
          {
            std::lock_guard<std::mutex> lock(m);
            if (next >= cells.size()) return;
            i = next++;
          }
          rows[i] = execute_cell(cells[i]);
        }
      };
      std::vector<std::thread> pool;
      for (int w = 0; w < workers; ++w) pool.emplace_back(work);
      for (auto& t : pool) t.join();
    }
  } else {
    rows.push_back(execute_cell(config));
    if (!rows.back().failed)
      write_convergence_csv((dir / "convergence.csv").string(), rows.back().report);
  }
  write_report_csv((dir / "report.csv").string(), rows);

  bool any_failed = false, all_converged = true;
  for (const RunRow& row : rows) {
    if (row.failed) any_failed = true;
    if (!row.report.converged) all_converged = false;
  }
  if (any_failed) return 1;
  return all_converged ? 0 : 2;
}

}  // namespace rksylv
