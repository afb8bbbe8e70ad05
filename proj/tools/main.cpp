#include <CLI11.hpp>

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "rksylv/config.hpp"
#include "rksylv/errors.hpp"
#include "rksylv/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Low-rank all-at-once solver for parabolic optimal control"};
  app.require_subcommand(0, 1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  int workers = 0;

  app.add_option("-c,--config", config_path, "INI-style configuration file");
  app.add_option("-s,--set", overrides, "Override, e.g. --set solver.tol=1e-6");
  app.add_option("-o,--out", out_dir, "Output directory");
  app.add_option("-w,--workers", workers, "Worker threads for sweeps");

  auto* solve_cmd = app.add_subcommand("solve", "Run the low-rank solver");
  auto* oracle_cmd = app.add_subcommand("oracle", "Run the direct reference solve only");
  auto* both_cmd = app.add_subcommand("both", "Run both and report the deviation");
  auto* sweep_cmd = app.add_subcommand("sweep", "Run the configured parameter sweep");

  CLI11_PARSE(app, argc, argv);

  try {
    rksylv::RunConfig config;
    if (!config_path.empty()) {
      config = rksylv::parse_config_file(config_path, overrides);
    } else {
      for (const auto& o : overrides) rksylv::apply_override(config, o);
    }
    if (solve_cmd->parsed()) config.mode = "solve";
    if (oracle_cmd->parsed()) config.mode = "oracle";
    if (both_cmd->parsed()) config.mode = "both";
    if (sweep_cmd->parsed()) config.mode = "sweep";
    if (!out_dir.empty()) config.out = out_dir;
    if (workers > 0) config.workers = workers;
    config.validate();

    const int code = rksylv::run_command(config);
    if (config.mode != "oracle") {
      std::cout << (code == 0 ? "converged" : code == 2 ? "finished without convergence" : "failed")
                << "; report written to " << config.out << "/report.csv\n";
    } else {
      std::cout << "reference solution written to " << config.out << '\n';
    }
    return code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
