#include "rksylv/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <sstream>

#include "rksylv/errors.hpp"

namespace rksylv {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

int to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const int x = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return x;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return x;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

std::vector<std::string> split(const std::string& v, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream is(v);
  while (std::getline(is, cur, sep)) parts.push_back(trim(cur));
  return parts;
}

void assign(RunConfig& c, const std::string& key, const std::string& value) {
  using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;
  static const std::map<std::string, Setter> setters = {
      {"problem.pde", [](RunConfig& r, const std::string&, const std::string& v) { r.pde = v; }},
      {"problem.level",
       [](RunConfig& r, const std::string& k, const std::string& v) { r.level = to_int(k, v); }},
      {"problem.eps",
       [](RunConfig& r, const std::string& k, const std::string& v) { r.eps = to_double(k, v); }},
      {"problem.mask", [](RunConfig& r, const std::string&, const std::string& v) { r.mask = v; }},
      {"problem.boundary_control",
       [](RunConfig& r, const std::string& k, const std::string& v) {
         r.boundary_control = to_bool(k, v);
       }},
      {"problem.desired",
       [](RunConfig& r, const std::string&, const std::string& v) { r.desired = v; }},
      {"problem.T",
       [](RunConfig& r, const std::string& k, const std::string& v) { r.T = to_double(k, v); }},
      {"problem.n_T",
       [](RunConfig& r, const std::string& k, const std::string& v) { r.n_T = to_int(k, v); }},
      {"problem.beta",
       [](RunConfig& r, const std::string& k, const std::string& v) { r.beta = to_double(k, v); }},
      {"solver.tol",
       [](RunConfig& r, const std::string& k, const std::string& v) { r.tol = to_double(k, v); }},
      {"solver.max_iterations",
       [](RunConfig& r, const std::string& k, const std::string& v) {
         r.max_iterations = to_int(k, v);
       }},
      {"solver.truncation",
       [](RunConfig& r, const std::string&, const std::string& v) { r.truncation = v; }},
      {"solver.truncation_threshold",
       [](RunConfig& r, const std::string& k, const std::string& v) {
         r.truncation_threshold = to_double(k, v);
       }},
      {"solver.single_direction",
       [](RunConfig& r, const std::string& k, const std::string& v) {
         r.single_direction = to_bool(k, v);
       }},
      {"run.mode", [](RunConfig& r, const std::string&, const std::string& v) { r.mode = v; }},
      {"run.out", [](RunConfig& r, const std::string&, const std::string& v) { r.out = v; }},
      {"run.workers",
       [](RunConfig& r, const std::string& k, const std::string& v) { r.workers = to_int(k, v); }},
      {"run.export",
       [](RunConfig& r, const std::string&, const std::string& v) { r.export_solution = v; }},
      {"sweep.level",
       [](RunConfig& r, const std::string& k, const std::string& v) {
         r.sweep_level.clear();
         for (const auto& s : split(v, ',')) r.sweep_level.push_back(to_int(k, s));
       }},
      {"sweep.n_T",
       [](RunConfig& r, const std::string& k, const std::string& v) {
         r.sweep_n_T.clear();
         for (const auto& s : split(v, ',')) r.sweep_n_T.push_back(to_int(k, s));
       }},
      {"sweep.beta",
       [](RunConfig& r, const std::string& k, const std::string& v) {
         r.sweep_beta.clear();
         for (const auto& s : split(v, ',')) r.sweep_beta.push_back(to_double(k, s));
       }},
      {"sweep.eps",
       [](RunConfig& r, const std::string& k, const std::string& v) {
         r.sweep_eps.clear();
         for (const auto& s : split(v, ',')) r.sweep_eps.push_back(to_double(k, s));
       }},
      {"sweep.mask_first",
       [](RunConfig& r, const std::string& k, const std::string& v) {
         r.sweep_mask_first.clear();
         for (const auto& s : split(v, ',')) r.sweep_mask_first.push_back(to_int(k, s));
       }},
      {"sweep.truncation",
       [](RunConfig& r, const std::string&, const std::string& v) {
         r.sweep_truncation = split(v, ',');
       }},
  };
  const auto it = setters.find(key);
  if (it == setters.end()) throw ConfigError("unknown configuration key '" + key + "'");
  it->second(c, key, value);
}

struct MaskSpec {
  enum { None, First, File } kind = None;
  int count = 0;
  std::string path;
};

MaskSpec parse_mask(const std::string& mask) {
  MaskSpec spec;
  if (mask == "none") return spec;
  if (mask.rfind("first:", 0) == 0) {
    spec.kind = MaskSpec::First;
    spec.count = to_int("problem.mask", mask.substr(6));
    if (spec.count < 0) throw ConfigError("problem.mask: first:N needs N >= 0");
    return spec;
  }
  if (mask.rfind("file:", 0) == 0) {
    spec.kind = MaskSpec::File;
    spec.path = mask.substr(5);
    if (spec.path.empty()) throw ConfigError("problem.mask: empty file path");
    return spec;
  }
  throw ConfigError("problem.mask: expected none, first:N or file:PATH, got '" + mask + "'");
}

std::vector<int> mask_nodes(const MaskSpec& spec) {
  std::vector<int> nodes;
  if (spec.kind == MaskSpec::First) {
    nodes.resize(spec.count);
    for (int i = 0; i < spec.count; ++i) nodes[i] = i;
  } else if (spec.kind == MaskSpec::File) {
    std::ifstream is(spec.path);
    if (!is) throw ConfigError("problem.mask: cannot open " + spec.path);
    int v;
    while (is >> v) nodes.push_back(v);
  }
  return nodes;
}

}  // namespace

void RunConfig::validate() const {
  if (pde != "heat" && pde != "convection_diffusion")
    throw ConfigError("problem.pde: expected heat or convection_diffusion, got '" + pde + "'");
  if (level < 1) throw ConfigError("problem.level: must be at least 1");
  if (pde == "convection_diffusion" && !(eps > 0.0))
    throw ConfigError("problem.eps: must be positive");
  if (!(T > 0.0)) throw ConfigError("problem.T: must be positive");
  if (n_T < 1) throw ConfigError("problem.n_T: must be at least 1");
  if (!(beta > 0.0)) throw ConfigError("problem.beta: must be positive");
  const MaskSpec spec = parse_mask(mask);
  if (boundary_control && spec.kind != MaskSpec::None)
    throw ConfigError("boundary control combined with an observation mask is unsupported");
  if (boundary_control && single_direction)
    throw ConfigError("solver.single_direction is not admissible with boundary control");
  if (desired != "constant_rank1" && desired != "rank6_modes" && desired.rfind("file:", 0) != 0)
    throw ConfigError("problem.desired: expected constant_rank1, rank6_modes or file:Y1,Y2");
  if (desired.rfind("file:", 0) == 0 && split(desired.substr(5), ',').size() != 2)
    throw ConfigError("problem.desired: file form needs two comma-separated paths");
  if (truncation != "off" && truncation != "threshold")
    throw ConfigError("solver.truncation: expected off or threshold, got '" + truncation + "'");
  solver();  // validates tol, max_iterations, threshold
  if (mode != "solve" && mode != "oracle" && mode != "both" && mode != "sweep")
    throw ConfigError("run.mode: expected solve, oracle, both or sweep, got '" + mode + "'");
  if (workers < 1) throw ConfigError("run.workers: must be at least 1");
  if (export_solution != "none" && export_solution != "factored" && export_solution != "dense")
    throw ConfigError("run.export: expected none, factored or dense");
  const bool has_axis = !sweep_level.empty() || !sweep_n_T.empty() || !sweep_beta.empty() ||
                        !sweep_eps.empty() || !sweep_mask_first.empty() || !sweep_truncation.empty();
  if (mode == "sweep" && !has_axis) throw ConfigError("run.mode=sweep needs at least one sweep axis");
  if (mode != "sweep" && has_axis)
    throw ConfigError("sweep axes are only meaningful with run.mode=sweep");
  for (const auto& t : sweep_truncation)
    if (t != "off" && t != "threshold")
      throw ConfigError("sweep.truncation: expected off or threshold entries");
}

SolverConfig RunConfig::solver() const {
  SolverConfig sc;
  sc.tol = tol;
  sc.max_iterations = max_iterations;
  sc.truncate = truncation == "threshold";
  sc.truncation_threshold = truncation_threshold;
  sc.single_direction = single_direction;
  sc.validate();
  return sc;
}

int RunConfig::mask_count() const {
  const MaskSpec spec = parse_mask(mask);
  if (spec.kind == MaskSpec::First) return spec.count;
  if (spec.kind == MaskSpec::File) return static_cast<int>(mask_nodes(spec).size());
  return 0;
}

RunConfig parse_config_entries(const std::map<std::string, std::string>& entries) {
  RunConfig c;
  for (const auto& [key, value] : entries) assign(c, key, value);
  c.validate();
  return c;
}

RunConfig parse_config_file(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  std::map<std::string, std::string> entries;
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::size_t comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(path + ":" + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty())
      throw ConfigError(path + ":" + std::to_string(lineno) + ": key outside any section");
    entries[section + "." + key] = value;
  }
  RunConfig c;
  for (const auto& [key, value] : entries) assign(c, key, value);
  for (const auto& o : overrides) apply_override(c, o);
  c.validate();
  return c;
}

void apply_override(RunConfig& config, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override '" + assignment + "' must look like section.key=value");
  assign(config, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

SylvesterOperator build_from_config(const RunConfig& config) {
  config.validate();
  const Domain domain = config.pde == "heat" ? Domain::UnitSquare : Domain::CenteredSquare;
  const Grid grid = build_grid(config.level, domain);

  DiscretizedPDE pde = config.pde == "heat" ? assemble_heat(grid)
                                            : assemble_convection_diffusion(grid, config.eps);
  const MaskSpec spec = parse_mask(config.mask);
  if (spec.kind != MaskSpec::None) {
    const std::vector<int> nodes = mask_nodes(spec);
    pde = apply_observation_mask(std::move(pde), nodes);
  }
  if (config.boundary_control) pde = restrict_control_to_boundary(std::move(pde), grid);

  DesiredState target;
  if (config.desired == "constant_rank1")
    target = make_desired_state(DesiredStateKind::ConstantRank1, grid, config.n_T);
  else if (config.desired == "rank6_modes")
    target = make_desired_state(DesiredStateKind::Rank6Modes, grid, config.n_T);
  else {
    const auto paths = split(config.desired.substr(5), ',');
    target = load_desired_state(paths[0], paths[1], grid.n, config.n_T);
  }

  SylvesterOperator op = build_operator(pde, TimeGrid{config.T, config.n_T}, config.beta, target);
  if (op.tag == CaseTag::BoundaryControl)
    compute_alpha3(op);
  else
    compute_alpha2(op);
  return op;
}

}  // namespace rksylv
