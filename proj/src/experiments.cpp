// SPDX-License-Identifier: Apache-2.0

#include "vicontrol/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>

#include "json.hpp"
#include "vicontrol/errors.hpp"
#include "vicontrol/linear_solver.hpp"
#include "vicontrol/sensitivity.hpp"
#include "vicontrol/vtk_io.hpp"

namespace vicontrol {

// ---------------------------------------------------------------- config

PdasConfig ExperimentConfig::pdas() const {
  PdasConfig p;
  p.c = c;
  p.max_iters = pdas_max_iters;
  p.active_tol = active_tol;
  return p;
}

LoopConfig ExperimentConfig::loop() const {
  LoopConfig l;
  l.max_iters = max_iters;
  l.rel_tol = rel_tol;
  l.step_rule = step_rule;
  return l;
}

PenaltyConfig ExperimentConfig::penalty(double gamma) const {
  PenaltyConfig p;
  p.gamma = gamma;
  p.psi = psi;
  p.quadrature = penalty_quadrature;
  p.newton_tol = newton_tol;
  return p;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(x)) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
}

long long to_integer(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
  }
}

int to_int(const std::string& key, const std::string& v) {
  const long long x = to_integer(key, v);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
    throw ConfigError("config key '" + key + "': value out of range");
  }
  return static_cast<int>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + v + "'");
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& item : split(v, ',')) out.push_back(to_double(key, item));
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

std::string number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>) {
      out += number(v[i]);
    } else {
      out += std::to_string(v[i]);
    }
  }
  return out;
}

}  // namespace

void apply_override(ExperimentConfig& cfg, const std::string& raw_key, const std::string& raw_value) {
  const std::string key = trim(raw_key);
  const std::string v = trim(raw_value);
  if (key == "level") {
    cfg.level = to_int(key, v);
  } else if (key == "levels") {
    cfg.levels.clear();
    for (const auto& item : split(v, ',')) cfg.levels.push_back(to_int(key, item));
  } else if (key == "alpha") {
    cfg.alpha = to_double(key, v);
  } else if (key == "beta") {
    cfg.beta = to_double(key, v);
  } else if (key == "gamma" || key == "gamma_list") {
    cfg.gamma_list = to_doubles(key, v);
  } else if (key == "psi") {
    cfg.psi = to_double(key, v);
  } else if (key == "q_min") {
    cfg.q_min = to_double(key, v);
  } else if (key == "q_max") {
    cfg.q_max = to_double(key, v);
  } else if (key == "c") {
    cfg.c = to_double(key, v);
  } else if (key == "q_init") {
    const auto q = to_doubles(key, v);
    if (q.size() != 3) throw ConfigError("config key 'q_init': expected q11,q22,q12");
    cfg.q_init = {q[0], q[1], q[2]};
  } else if (key == "desired_control") {
    cfg.desired_control = to_bool(key, v);
  } else if (key == "rel_tol") {
    cfg.rel_tol = to_double(key, v);
  } else if (key == "max_iters") {
    cfg.max_iters = to_int(key, v);
  } else if (key == "step_rule") {
    if (v == "constant") {
      cfg.step_rule = StepRule::Constant;
    } else if (v == "bb") {
      cfg.step_rule = StepRule::BarzilaiBorwein;
    } else {
      throw ConfigError("config key 'step_rule': expected constant or bb, got '" + v + "'");
    }
  } else if (key == "adjoint") {
    if (v == "active_set") {
      cfg.adjoint = ObstacleAdjoint::ActiveSet;
    } else if (v == "surrogate") {
      cfg.adjoint = ObstacleAdjoint::PenalizedSurrogate;
    } else {
      throw ConfigError("config key 'adjoint': expected active_set or surrogate, got '" + v + "'");
    }
  } else if (key == "gamma_adj") {
    cfg.gamma_adj = to_double(key, v);
  } else if (key == "penalty_quadrature") {
    if (v == "lumped") {
      cfg.penalty_quadrature = PenaltyQuadrature::Lumped;
    } else if (v == "gauss") {
      cfg.penalty_quadrature = PenaltyQuadrature::Gauss;
    } else {
      throw ConfigError("config key 'penalty_quadrature': expected lumped or gauss, got '" + v + "'");
    }
  } else if (key == "newton_tol") {
    cfg.newton_tol = to_double(key, v);
  } else if (key == "pdas_max_iters") {
    cfg.pdas_max_iters = to_int(key, v);
  } else if (key == "active_tol") {
    cfg.active_tol = to_double(key, v);
  } else if (key == "convergence_obstacle") {
    cfg.convergence_obstacle = to_bool(key, v);
  } else if (key == "gradcheck_gamma") {
    cfg.gradcheck_gamma = to_double(key, v);
  } else if (key == "gradcheck_controls") {
    cfg.gradcheck_controls = to_int(key, v);
  } else if (key == "gradcheck_directions") {
    cfg.gradcheck_directions = to_int(key, v);
  } else if (key == "fd_step") {
    cfg.fd_step = to_double(key, v);
  } else if (key == "gradcheck_tol") {
    cfg.gradcheck_tol = to_double(key, v);
  } else if (key == "sensitivity_steps") {
    cfg.sensitivity_steps = to_doubles(key, v);
  } else if (key == "sensitivity_directions") {
    cfg.sensitivity_directions = to_int(key, v);
  } else if (key == "first_order_candidates") {
    cfg.first_order_candidates = to_int(key, v);
  } else if (key == "output_dir") {
    if (v.empty()) throw ConfigError("config key 'output_dir': empty path");
    cfg.output_dir = v;
  } else if (key == "seed") {
    const long long s = to_integer(key, v);
    if (s < 0) throw ConfigError("config key 'seed': must be nonnegative");
    cfg.seed = static_cast<std::uint64_t>(s);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  apply_override(cfg, assignment.substr(0, eq), assignment.substr(eq + 1));
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.find('=') == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    }
    try {
      apply_override(cfg, line);
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

void validate(const ExperimentConfig& cfg) {
  const auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(cfg.level >= 1 && cfg.level <= StructuredMesh::kMaxLevel,
          "level must be between 1 and " + std::to_string(StructuredMesh::kMaxLevel));
  require(!cfg.levels.empty(), "levels must not be empty");
  for (std::size_t i = 0; i < cfg.levels.size(); ++i) {
    require(cfg.levels[i] >= 1 && cfg.levels[i] <= StructuredMesh::kMaxLevel, "levels out of range");
    require(i == 0 || cfg.levels[i] > cfg.levels[i - 1], "levels must be strictly increasing");
  }
  require(cfg.alpha > 0.0, "alpha must be positive");
  require(cfg.beta >= 0.0, "beta must be nonnegative");
  require(!cfg.gamma_list.empty(), "gamma_list must not be empty");
  for (std::size_t i = 0; i < cfg.gamma_list.size(); ++i) {
    require(cfg.gamma_list[i] > 0.0, "gamma values must be positive");
    require(i == 0 || cfg.gamma_list[i] > cfg.gamma_list[i - 1], "gamma_list must be strictly increasing");
  }
  require(cfg.psi > 0.0, "psi must be positive");
  require(cfg.q_min > 0.0 && cfg.q_max > cfg.q_min, "need 0 < q_min < q_max");
  require(cfg.c > 0.0, "c must be positive");
  const Sym2 lo = cfg.q_init.shifted(-cfg.q_min);
  const Sym2 hi = (-cfg.q_init).shifted(cfg.q_max);
  require(lo.det() > 0.0 && lo.trace() > 0.0 && hi.det() > 0.0 && hi.trace() > 0.0,
          "q_init must have eigenvalues strictly between q_min and q_max");
  require(cfg.rel_tol > 0.0, "rel_tol must be positive");
  require(cfg.max_iters > 0, "max_iters must be positive");
  require(cfg.gamma_adj > 0.0, "gamma_adj must be positive");
  require(cfg.newton_tol > 0.0, "newton_tol must be positive");
  require(cfg.pdas_max_iters > 0, "pdas_max_iters must be positive");
  require(cfg.active_tol >= 0.0, "active_tol must be nonnegative");
  require(cfg.gradcheck_gamma > 0.0, "gradcheck_gamma must be positive");
  require(cfg.gradcheck_controls > 0 && cfg.gradcheck_directions > 0, "gradcheck counts must be positive");
  require(cfg.fd_step > 0.0, "fd_step must be positive");
  require(cfg.gradcheck_tol > 0.0, "gradcheck_tol must be positive");
  for (std::size_t i = 0; i < cfg.sensitivity_steps.size(); ++i) {
    require(cfg.sensitivity_steps[i] > 0.0 && cfg.sensitivity_steps[i] <= 1.0, "sensitivity_steps must lie in (0, 1]");
    require(i == 0 || cfg.sensitivity_steps[i] < cfg.sensitivity_steps[i - 1],
            "sensitivity_steps must be strictly decreasing");
  }
  require(cfg.sensitivity_directions > 0, "sensitivity_directions must be positive");
  require(cfg.first_order_candidates >= 0, "first_order_candidates must be nonnegative");
}

std::string dump_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "level = " << cfg.level << "\n";
  out << "levels = " << join(cfg.levels) << "\n";
  out << "alpha = " << number(cfg.alpha) << "\n";
  out << "beta = " << number(cfg.beta) << "\n";
  out << "gamma_list = " << join(cfg.gamma_list) << "\n";
  out << "psi = " << number(cfg.psi) << "\n";
  out << "q_min = " << number(cfg.q_min) << "\n";
  out << "q_max = " << number(cfg.q_max) << "\n";
  out << "c = " << number(cfg.c) << "\n";
  out << "q_init = " << number(cfg.q_init.a11) << "," << number(cfg.q_init.a22) << "," << number(cfg.q_init.a12) << "\n";
  out << "desired_control = " << (cfg.desired_control ? "true" : "false") << "\n";
  out << "rel_tol = " << number(cfg.rel_tol) << "\n";
  out << "max_iters = " << cfg.max_iters << "\n";
  out << "step_rule = " << (cfg.step_rule == StepRule::Constant ? "constant" : "bb") << "\n";
  out << "adjoint = " << (cfg.adjoint == ObstacleAdjoint::ActiveSet ? "active_set" : "surrogate") << "\n";
  out << "gamma_adj = " << number(cfg.gamma_adj) << "\n";
  out << "penalty_quadrature = " << (cfg.penalty_quadrature == PenaltyQuadrature::Lumped ? "lumped" : "gauss") << "\n";
  out << "newton_tol = " << number(cfg.newton_tol) << "\n";
  out << "pdas_max_iters = " << cfg.pdas_max_iters << "\n";
  out << "active_tol = " << number(cfg.active_tol) << "\n";
  out << "convergence_obstacle = " << (cfg.convergence_obstacle ? "true" : "false") << "\n";
  out << "gradcheck_gamma = " << number(cfg.gradcheck_gamma) << "\n";
  out << "gradcheck_controls = " << cfg.gradcheck_controls << "\n";
  out << "gradcheck_directions = " << cfg.gradcheck_directions << "\n";
  out << "fd_step = " << number(cfg.fd_step) << "\n";
  out << "gradcheck_tol = " << number(cfg.gradcheck_tol) << "\n";
  out << "sensitivity_steps = " << join(cfg.sensitivity_steps) << "\n";
  out << "sensitivity_directions = " << cfg.sensitivity_directions << "\n";
  out << "first_order_candidates = " << cfg.first_order_candidates << "\n";
  out << "output_dir = " << cfg.output_dir.string() << "\n";
  out << "seed = " << cfg.seed << "\n";
  return out.str();
}

// ---------------------------------------------------------------- problem data

double model_load(double x, double y) { return (1 - y * y) * (6 * x * x + 2) + 2 * (1 - x * x); }
double model_state(double x, double y) { return (1 - x * x) * (1 - y * y); }
Sym2 model_control(double x, double /*y*/) { return {1 + x * x, 1.0, 0.0}; }

Problem::Problem(const ExperimentConfig& cfg, int level) : space(level) {
  f_load = assemble_load(space, model_load);
  objective.alpha = cfg.alpha;
  objective.beta = cfg.beta;
  objective.bounds = cfg.bounds();
  objective.u_d = interpolate(space.mesh(), model_state);
  objective.q_d = MatrixControlField(space.size());
  if (cfg.desired_control) {
    for (std::size_t i = 0; i < space.size(); ++i) {
      const auto p = space.mesh().node(i);
      objective.q_d.set(i, model_control(p.x, p.y));
    }
  }
  q_init = MatrixControlField(space.size(), cfg.q_init);
}

MatrixControlField random_field(std::size_t n, std::mt19937_64& rng, double amplitude) {
  std::uniform_real_distribution<double> dist(-amplitude, amplitude);
  MatrixControlField r(n);
  for (auto& c : r.comp) {
    for (auto& v : c) v = dist(rng);
  }
  return r;
}

MatrixControlField admissible_direction(const MatrixControlField& q, const MatrixControlField& r, SpectralBounds bounds,
                                        double theta) {
  auto target = project_spectral(q + r, bounds, 1e-6 * (bounds.q_max - bounds.q_min));
  return (target - q).scaled(theta);
}

// ---------------------------------------------------------------- output helpers

namespace {

std::string sci(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10e", v);
  return buf;
}

std::string gamma_tag(double g) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", g);
  return buf;
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::filesystem::path emit(const ExperimentConfig& cfg, const std::string& name, const std::string& content,
                           std::vector<std::filesystem::path>& files) {
  const auto path = cfg.output_dir / name;
  write_file_atomic(path, content);
  files.push_back(path);
  return path;
}

VtkGrid field_grid(const FeSpace& space, const ScalarField& u, const ScalarField& lambda, const MatrixControlField& q) {
  auto grid = make_grid(space.mesh());
  grid.scalars = {{"u", u}, {"lambda", lambda}, {"q11", q.q11()}, {"q22", q.q22()}, {"q12", q.q12()}};
  return grid;
}

std::string iteration_log(const std::vector<IterationRecord>& history) {
  std::string out =
      "iteration,objective,tracking,tikhonov,barrier,grad_norm,stationarity,step,backtracks,violation,"
      "min_det_lower,min_det_upper,min_trace_lower,min_trace_upper\n";
  for (const auto& r : history) {
    out += std::to_string(r.iteration) + ',' + sci(r.parts.total()) + ',' + sci(r.parts.tracking) + ',' +
           sci(r.parts.tikhonov) + ',' + sci(r.parts.barrier) + ',' + sci(r.grad_norm) + ',' + sci(r.stationarity) +
           ',' + sci(r.step) + ',' + std::to_string(r.backtracks) + ',' + sci(r.violation) + ',' +
           sci(r.margins.min_det_lower) + ',' + sci(r.margins.min_det_upper) + ',' + sci(r.margins.min_trace_lower) +
           ',' + sci(r.margins.min_trace_upper) + '\n';
  }
  return out;
}

std::size_t count_infeasible(const std::vector<IterationRecord>& history) {
  return static_cast<std::size_t>(
      std::count_if(history.begin(), history.end(), [](const auto& r) { return !r.margins.strictly_feasible(); }));
}

nlohmann::json loop_summary(const OptResult& r) {
  nlohmann::json j;
  j["termination"] = to_string(r.termination);
  j["iterations"] = r.history.empty() ? 0 : r.history.back().iteration;
  j["state_solves"] = r.state_solves;
  j["objective"] = r.final.parts.total();
  j["tracking"] = r.final.parts.tracking;
  j["tikhonov"] = r.final.parts.tikhonov;
  j["barrier"] = r.final.parts.barrier;
  j["initial_stationarity"] = r.initial_stationarity;
  j["final_stationarity"] = r.history.empty() ? 0.0 : r.history.back().stationarity;
  return j;
}

Example1Result compute_reference(const Problem& prob, const ExperimentConfig& cfg) {
  const auto pdas = cfg.pdas();
  Example1Result out;
  out.result = solve_vi_constrained(prob.space, prob.q_init, prob.objective, prob.f_load, cfg.psi, pdas, cfg.loop(),
                                    cfg.adjoint, cfg.gamma_adj);
  out.state = solve_vi(prob.space, out.result.final.q, prob.f_load, cfg.psi, pdas);
  out.contact_nodes = static_cast<std::size_t>(std::count(out.state.active.begin(), out.state.active.end(), 1));
  out.max_lambda = *std::max_element(out.state.lambda.begin(), out.state.lambda.end());
  out.multiplier_ratio = multiplier_bound_ratio(prob.space, out.state, prob.f_load);
  out.gradient_ratio = gradient_bound_ratio(prob.space, out.state, prob.f_load, cfg.q_min, cfg.q_max);
  out.residuals = complementarity_residuals(prob.space, out.state, cfg.psi);
  out.infeasible_iterates = count_infeasible(out.result.history);
  return out;
}

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::string format_result_table(const std::vector<ResultRow>& rows) {
  std::string out = "gamma,err_u_L2,err_q_L2\n";
  for (const auto& r : rows) out += sci(r.gamma) + ',' + sci(r.err_u) + ',' + sci(r.err_q) + '\n';
  return out;
}

// ---------------------------------------------------------------- runners

Example1Result run_example1(const ExperimentConfig& cfg) {
  validate(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const Problem prob(cfg, cfg.level);
  auto out = compute_reference(prob, cfg);

  emit(cfg, "example1_fields.vtk", format_vtk(field_grid(prob.space, out.state.u, out.state.lambda, out.result.final.q)),
       out.files);
  emit(cfg, "example1_iterations.csv", iteration_log(out.result.history), out.files);

  nlohmann::json j;
  j["experiment"] = "example1";
  j["created"] = timestamp();
  j["elapsed_seconds"] = elapsed(t0);
  j["config"] = dump_config(cfg);
  j["level"] = cfg.level;
  j["optimizer"] = loop_summary(out.result);
  j["contact_nodes"] = out.contact_nodes;
  j["max_lambda"] = out.max_lambda;
  j["multiplier_ratio"] = out.multiplier_ratio;
  j["gradient_ratio"] = out.gradient_ratio;
  j["complementarity"] = {{"feas_u", out.residuals.feas_u},
                          {"feas_lambda", out.residuals.feas_lambda},
                          {"comp", out.residuals.comp}};
  j["infeasible_iterates"] = out.infeasible_iterates;
  emit(cfg, "example1_summary.json", j.dump(2) + "\n", out.files);
  return out;
}

Example2Result run_example2(const ExperimentConfig& cfg) {
  validate(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const Problem prob(cfg, cfg.level);
  Example2Result out;
  out.reference = compute_reference(prob, cfg);
  const auto& ref = out.reference.result.final;
  out.legs = gamma_continuation(prob.space, prob.q_init, prob.objective, prob.f_load, cfg.penalty(cfg.gamma_list.front()),
                                cfg.gamma_list, cfg.loop(), {&ref.q, &ref.u});
  out.infeasible_iterates = out.reference.infeasible_iterates;
  std::string legs_csv = "gamma,iterations,termination,stationarity,violation,state_solves\n";
  for (const auto& leg : out.legs) {
    out.rows.push_back({leg.gamma, leg.err_u, leg.err_q});
    out.infeasible_iterates += count_infeasible(leg.result.history);
    const auto& h = leg.result.history;
    legs_csv += sci(leg.gamma) + ',' + std::to_string(h.empty() ? 0 : h.back().iteration) + ',' +
                to_string(leg.result.termination) + ',' + sci(h.empty() ? 0.0 : h.back().stationarity) + ',' +
                sci(max_violation(leg.result.final.u, cfg.psi)) + ',' + std::to_string(leg.result.state_solves) + '\n';
    emit(cfg, "example2_gamma_" + gamma_tag(leg.gamma) + ".vtk",
         format_vtk(field_grid(prob.space, leg.result.final.u, leg.result.final.lambda, leg.result.final.q)),
         out.files);
  }
  emit(cfg, "example2_reference.vtk",
       format_vtk(field_grid(prob.space, out.reference.state.u, out.reference.state.lambda, ref.q)), out.files);
  emit(cfg, "example2_table.csv", format_result_table(out.rows), out.files);
  emit(cfg, "example2_legs.csv", legs_csv, out.files);

  nlohmann::json j;
  j["experiment"] = "example2";
  j["created"] = timestamp();
  j["elapsed_seconds"] = elapsed(t0);
  j["config"] = dump_config(cfg);
  j["level"] = cfg.level;
  j["reference"] = loop_summary(out.reference.result);
  j["legs"] = nlohmann::json::array();
  for (const auto& leg : out.legs) {
    auto s = loop_summary(leg.result);
    s["gamma"] = leg.gamma;
    s["err_u_L2"] = leg.err_u;
    s["err_q_L2"] = leg.err_q;
    j["legs"].push_back(s);
  }
  j["infeasible_iterates"] = out.infeasible_iterates;
  emit(cfg, "example2_metadata.json", j.dump(2) + "\n", out.files);
  return out;
}

ConvergenceResult run_convergence(const ExperimentConfig& cfg) {
  validate(cfg);
  ConvergenceResult out;
  const auto pdas = cfg.pdas();

  // With the obstacle there is no closed form; compare with two levels finer.
  std::unique_ptr<Problem> fine;
  ScalarField u_fine;
  if (cfg.convergence_obstacle) {
    const int fine_level = cfg.levels.back() + 2;
    if (fine_level > StructuredMesh::kMaxLevel) throw ConfigError("convergence: finest level too large");
    fine = std::make_unique<Problem>(cfg, fine_level);
    u_fine = solve_vi(fine->space, fine->objective.q_d, fine->f_load, cfg.psi, pdas).u;
  }

  for (int level : cfg.levels) {
    const Problem prob(cfg, level);
    MatrixControlField q_d(prob.space.size());
    for (std::size_t i = 0; i < prob.space.size(); ++i) {
      const auto p = prob.space.mesh().node(i);
      q_d.set(i, model_control(p.x, p.y));
    }
    ConvergenceRow row;
    row.level = level;
    row.h = prob.space.h();
    if (cfg.convergence_obstacle) {
      const auto u = solve_vi(prob.space, q_d, prob.f_load, cfg.psi, pdas).u;
      const auto up = prolongate(prob.space.mesh(), u, fine->space.mesh());
      std::vector<double> diff(up.size());
      for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = up[i] - u_fine[i];
      row.error = l2_norm(fine->space, diff);
    } else {
      const auto k = assemble_stiffness(prob.space, q_d);
      const auto u = solve_spd(k, prob.f_load, 1e-13, &prob.space.mesh().boundary_mask());
      row.error = l2_error(prob.space, u, model_state);
    }
    row.rate = out.rows.empty() ? std::numeric_limits<double>::quiet_NaN()
                                : std::log(out.rows.back().error / row.error) / std::log(out.rows.back().h / row.h);
    out.rows.push_back(row);
  }

  std::string csv = "level,h,err_L2,rate\n";
  for (const auto& r : out.rows) csv += std::to_string(r.level) + ',' + sci(r.h) + ',' + sci(r.error) + ',' + sci(r.rate) + '\n';
  emit(cfg, "convergence.csv", csv, out.files);
  return out;
}

namespace {

MatrixControlField random_admissible_control(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> diag(1.5, 4.0);
  std::uniform_real_distribution<double> off(-0.5, 0.5);
  MatrixControlField q(n);
  for (std::size_t i = 0; i < n; ++i) q.set(i, {diag(rng), diag(rng), off(rng)});
  return q;
}

// Quotient errors for each direction; `orders` gets the observed order between consecutive steps.
void quotient_study(const Problem& prob, const ExperimentConfig& cfg, const MatrixControlField& q, double psi,
                    const std::vector<MatrixControlField>& directions, const std::string& regime,
                    std::vector<QuotientRow>& rows, double* max_residual) {
  const auto pdas = cfg.pdas();
  const auto base = solve_vi(prob.space, q, prob.f_load, psi, pdas);
  const auto cone = build_critical_cone(prob.space.mesh(), base, cfg.active_tol);
  for (std::size_t k = 0; k < directions.size(); ++k) {
    const auto& d = directions[k];
    const auto der = directional_derivative(prob.space, q, d, base.u, cone, pdas);
    if (max_residual) {
      const auto r = derivative_complementarity_check(prob.space, q, d, base.u, der.u, cone);
      *max_residual = std::max(*max_residual, r.max());
    }
    double prev_error = 0.0, prev_t = 0.0;
    for (std::size_t s = 0; s < cfg.sensitivity_steps.size(); ++s) {
      const double t = cfg.sensitivity_steps[s];
      auto qt = q;
      qt.axpy(t, d);
      const auto moved = solve_vi(prob.space, qt, prob.f_load, psi, pdas, &base.active);
      std::vector<double> diff(base.u.size());
      for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = (moved.u[i] - base.u[i]) / t - der.u[i];
      QuotientRow row;
      row.regime = regime;
      row.direction = static_cast<int>(k);
      row.t = t;
      row.error = l2_norm(prob.space, diff);
      row.order = s == 0 ? std::numeric_limits<double>::quiet_NaN()
                         : std::log(prev_error / row.error) / std::log(prev_t / t);
      rows.push_back(row);
      prev_error = row.error;
      prev_t = t;
    }
  }
}

bool decreasing_per_direction(const std::vector<QuotientRow>& rows, const std::string& regime) {
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].regime != regime || rows[i - 1].regime != regime) continue;
    if (rows[i].direction == rows[i - 1].direction && !(rows[i].error < rows[i - 1].error)) return false;
  }
  return true;
}

std::string quotient_csv(const std::vector<QuotientRow>& rows) {
  std::string csv = "regime,direction,t,error_L2,order\n";
  for (const auto& r : rows) {
    csv += r.regime + ',' + std::to_string(r.direction) + ',' + sci(r.t) + ',' + sci(r.error) + ',' + sci(r.order) + '\n';
  }
  return csv;
}

std::vector<MatrixControlField> random_directions(const MatrixControlField& q, SpectralBounds bounds, int count,
                                                  std::mt19937_64& rng) {
  std::vector<MatrixControlField> out;
  for (int k = 0; k < count; ++k) out.push_back(admissible_direction(q, random_field(q.size(), rng, 1.0), bounds));
  return out;
}

}  // namespace

GradcheckResult run_gradcheck(const ExperimentConfig& cfg) {
  validate(cfg);
  const Problem prob(cfg, cfg.level);
  const auto& space = prob.space;
  std::mt19937_64 rng(cfg.seed);
  GradcheckResult out;

  const auto pen = cfg.penalty(cfg.gradcheck_gamma);
  for (int c = 0; c < cfg.gradcheck_controls; ++c) {
    const auto q = random_admissible_control(space.size(), rng);
    const auto u = solve_penalized(space, q, prob.f_load, pen);
    const auto p = solve_adjoint(space, q, u, prob.objective.u_d, pen);
    const auto grad = reduced_gradient(space, q, u, p, prob.objective);
    const auto objective = [&](double s, const MatrixControlField& d) {
      auto qs = q;
      qs.axpy(s, d);
      const auto us = solve_penalized(space, qs, prob.f_load, pen, &u);
      return evaluate_objective(space, qs, us, prob.objective).total();
    };
    for (int k = 0; k < cfg.gradcheck_directions; ++k) {
      const auto d = random_field(space.size(), rng, 1.0);
      AdjointCheckRow row;
      row.control = c;
      row.direction = k;
      row.adjoint = grad.dual.pair(d);
      const double eps = cfg.fd_step;
      row.fd = (objective(eps, d) - objective(-eps, d)) / (2 * eps);
      row.fd_half = (objective(eps / 2, d) - objective(-eps / 2, d)) / eps;
      const double denom = std::max(std::abs(row.adjoint), std::numeric_limits<double>::min());
      row.rel_error = std::abs(row.fd - row.adjoint) / denom;
      row.rel_error_half = std::abs(row.fd_half - row.adjoint) / denom;
      out.max_rel_error = std::max(out.max_rel_error, row.rel_error);
      out.adjoint_rows.push_back(row);
    }
  }

  // Obstacle sensitivity at the initial control.
  const auto directions = random_directions(prob.q_init, cfg.bounds(), cfg.sensitivity_directions, rng);
  quotient_study(prob, cfg, prob.q_init, cfg.psi, directions, "contact", out.quotient_rows, nullptr);
  out.quotients_decrease = decreasing_per_direction(out.quotient_rows, "contact");
  {
    const auto base = solve_vi(space, prob.q_init, prob.f_load, cfg.psi, cfg.pdas());
    const auto cone = build_critical_cone(space.mesh(), base, cfg.active_tol);
    const auto zero = directional_derivative(space, prob.q_init, MatrixControlField(space.size()), base.u, cone,
                                             cfg.pdas());
    for (double v : zero.u) out.zero_direction_norm = std::max(out.zero_direction_norm, std::abs(v));
  }
  out.passed = out.max_rel_error <= cfg.gradcheck_tol && out.quotients_decrease && out.zero_direction_norm == 0.0;

  std::string csv = "control,direction,adjoint,fd,rel_error,fd_half,rel_error_half\n";
  for (const auto& r : out.adjoint_rows) {
    csv += std::to_string(r.control) + ',' + std::to_string(r.direction) + ',' + sci(r.adjoint) + ',' + sci(r.fd) + ',' +
           sci(r.rel_error) + ',' + sci(r.fd_half) + ',' + sci(r.rel_error_half) + '\n';
  }
  emit(cfg, "gradcheck_adjoint.csv", csv, out.files);
  emit(cfg, "gradcheck_derivative.csv", quotient_csv(out.quotient_rows), out.files);
  return out;
}

SensitivityResult run_sensitivity(const ExperimentConfig& cfg) {
  validate(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const Problem prob(cfg, cfg.level);
  const auto& space = prob.space;
  std::mt19937_64 rng(cfg.seed);
  SensitivityResult out;

  const auto ref = compute_reference(prob, cfg);
  const auto& q_opt = ref.result.final.q;
  const auto cone = build_critical_cone(space.mesh(), ref.state, cfg.active_tol);
  out.zero_nodes = cone.count_zero();
  out.nonpositive_nodes = cone.count_nonpositive();
  out.free_nodes = cone.count_free();

  const auto directions = random_directions(q_opt, cfg.bounds(), cfg.sensitivity_directions, rng);
  quotient_study(prob, cfg, q_opt, cfg.psi, directions, "contact", out.rows, &out.max_derivative_residual);
  out.contact_monotone = decreasing_per_direction(out.rows, "contact");

  // Obstacle far above the state: no contact, the map is smooth.
  const double psi_free = 1e6;
  quotient_study(prob, cfg, q_opt, psi_free, directions, "no-contact", out.rows, &out.max_derivative_residual);
  out.min_no_contact_order = std::numeric_limits<double>::infinity();
  for (const auto& r : out.rows) {
    if (r.regime == "no-contact" && !std::isnan(r.order)) out.min_no_contact_order = std::min(out.min_no_contact_order, r.order);
  }

  const auto candidates_around = [&](const MatrixControlField& q) {
    std::vector<MatrixControlField> c;
    for (int k = 0; k < cfg.first_order_candidates; ++k) {
      c.push_back(project_spectral(q + random_field(q.size(), rng, 1.0), cfg.bounds(),
                                   1e-6 * (cfg.q_max - cfg.q_min)));
    }
    return c;
  };
  const auto pdas = cfg.pdas();
  out.first_order_optimum =
      primal_first_order_check(space, q_opt, ref.state, candidates_around(q_opt), prob.objective, pdas);
  const auto init_state = solve_vi(space, prob.q_init, prob.f_load, cfg.psi, pdas);
  out.first_order_initial =
      primal_first_order_check(space, prob.q_init, init_state, candidates_around(prob.q_init), prob.objective, pdas);

  const bool first_order_ok =
      out.first_order_optimum.min_value >= -1e-6 * std::max(out.first_order_optimum.scale, 1.0);
  out.passed = out.contact_monotone && out.min_no_contact_order >= 0.9 && out.max_derivative_residual <= 1e-8 &&
               first_order_ok;

  emit(cfg, "sensitivity_quotients.csv", quotient_csv(out.rows), out.files);
  std::string fo = "point,candidate,value\n";
  for (std::size_t k = 0; k < out.first_order_optimum.values.size(); ++k) {
    fo += "optimum," + std::to_string(k) + ',' + sci(out.first_order_optimum.values[k]) + '\n';
  }
  for (std::size_t k = 0; k < out.first_order_initial.values.size(); ++k) {
    fo += "initial," + std::to_string(k) + ',' + sci(out.first_order_initial.values[k]) + '\n';
  }
  emit(cfg, "sensitivity_first_order.csv", fo, out.files);

  nlohmann::json j;
  j["experiment"] = "sensitivity";
  j["created"] = timestamp();
  j["elapsed_seconds"] = elapsed(t0);
  j["config"] = dump_config(cfg);
  j["cone"] = {{"zero_nodes", out.zero_nodes}, {"nonpositive_nodes", out.nonpositive_nodes}, {"free_nodes", out.free_nodes}};
  j["contact_monotone"] = out.contact_monotone;
  j["min_no_contact_order"] = out.min_no_contact_order;
  j["max_derivative_residual"] = out.max_derivative_residual;
  j["first_order_min_optimum"] = out.first_order_optimum.min_value;
  j["first_order_scale_optimum"] = out.first_order_optimum.scale;
  j["first_order_min_initial"] = out.first_order_initial.min_value;
  j["passed"] = out.passed;
  emit(cfg, "sensitivity_summary.json", j.dump(2) + "\n", out.files);
  return out;
}

}  // namespace vicontrol
