// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vicontrol/errors.hpp"
#include "vicontrol/experiments.hpp"

using namespace vicontrol;

namespace {

constexpr int kConfigError = 2;
constexpr int kSolverError = 3;
constexpr int kCheckFailure = 4;

struct CommonArgs {
  std::string config;
  std::string out;
  std::optional<int> level;
  std::string gamma;
  std::optional<long long> seed;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config, "key = value config file");
  cmd->add_option("--out", args.out, "output directory");
  cmd->add_option("--level", args.level, "refinement level");
  cmd->add_option("--gamma", args.gamma, "comma separated penalty parameters");
  cmd->add_option("--seed", args.seed, "random seed");
  cmd->add_option("overrides", args.overrides, "key=value overrides");
}

ExperimentConfig resolve(const CommonArgs& args) {
  ExperimentConfig cfg = args.config.empty() ? ExperimentConfig{} : load_config(args.config);
  for (const auto& o : args.overrides) apply_override(cfg, o);
  if (!args.out.empty()) apply_override(cfg, "output_dir", args.out);
  if (args.level) cfg.level = *args.level;
  if (!args.gamma.empty()) apply_override(cfg, "gamma_list", args.gamma);
  if (args.seed) apply_override(cfg, "seed", std::to_string(*args.seed));
  validate(cfg);
  return cfg;
}

void print_files(const std::vector<std::filesystem::path>& files) {
  for (const auto& f : files) std::printf("wrote %s\n", f.string().c_str());
}

int example1(const ExperimentConfig& cfg) {
  const auto r = run_example1(cfg);
  const auto& h = r.result.history;
  std::printf("example1 level %d: %s after %d iterations, J = %.10e\n", cfg.level,
              to_string(r.result.termination).c_str(), h.empty() ? 0 : h.back().iteration,
              r.result.final.parts.total());
  std::printf("contact nodes %zu, max lambda %.6e, ||lambda||/||f|| = %.4f\n", r.contact_nodes, r.max_lambda,
              r.multiplier_ratio);
  if (r.multiplier_ratio > 4.5) std::printf("warning: multiplier ratio above 4.5\n");
  std::printf("complementarity: feas_u %.3e feas_lambda %.3e comp %.3e\n", r.residuals.feas_u, r.residuals.feas_lambda,
              r.residuals.comp);
  std::printf("infeasible iterates: %zu\n", r.infeasible_iterates);
  print_files(r.files);
  return 0;
}

int example2(const ExperimentConfig& cfg) {
  const auto r = run_example2(cfg);
  std::printf("%-10s %-14s %-14s %s\n", "gamma", "err_u_L2", "err_q_L2", "termination");
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    std::printf("%-10g %-14.6e %-14.6e %s\n", r.rows[i].gamma, r.rows[i].err_u, r.rows[i].err_q,
                to_string(r.legs[i].result.termination).c_str());
  }
  std::printf("infeasible iterates: %zu\n", r.infeasible_iterates);
  print_files(r.files);
  return 0;
}

int convergence(const ExperimentConfig& cfg) {
  const auto r = run_convergence(cfg);
  std::printf("%-6s %-14s %-14s %s\n", "level", "h", "err_L2", "rate");
  for (const auto& row : r.rows) {
    std::printf("%-6d %-14.6e %-14.6e %.4f\n", row.level, row.h, row.error, row.rate);
  }
  print_files(r.files);
  return 0;
}

int gradcheck(const ExperimentConfig& cfg) {
  const auto r = run_gradcheck(cfg);
  std::printf("adjoint vs central differences: max relative error %.3e (tolerance %.1e)\n", r.max_rel_error,
              cfg.gradcheck_tol);
  std::printf("derivative quotients decrease: %s\n", r.quotients_decrease ? "yes" : "no");
  std::printf("zero direction: max |u~| = %.3e\n", r.zero_direction_norm);
  print_files(r.files);
  std::printf("%s\n", r.passed ? "PASS" : "FAIL");
  return r.passed ? 0 : kCheckFailure;
}

int sensitivity(const ExperimentConfig& cfg) {
  const auto r = run_sensitivity(cfg);
  std::printf("critical cone: %zu zero, %zu nonpositive, %zu free nodes\n", r.zero_nodes, r.nonpositive_nodes,
              r.free_nodes);
  std::printf("%-11s %-4s %-10s %-14s %s\n", "regime", "dir", "t", "error_L2", "order");
  for (const auto& row : r.rows) {
    std::printf("%-11s %-4d %-10g %-14.6e %.4f\n", row.regime.c_str(), row.direction, row.t, row.error, row.order);
  }
  std::printf("max derivative residual %.3e\n", r.max_derivative_residual);
  std::printf("first order: min %.3e (scale %.3e) at the optimum, min %.3e at q_init\n",
              r.first_order_optimum.min_value, r.first_order_optimum.scale, r.first_order_initial.min_value);
  print_files(r.files);
  std::printf("%s\n", r.passed ? "PASS" : "FAIL");
  return r.passed ? 0 : kCheckFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal control of the coefficient of an elliptic obstacle problem"};
  app.require_subcommand(1);
  CommonArgs args;
  struct Command {
    const char* name;
    const char* help;
    int (*run)(const ExperimentConfig&);
  };
  const std::vector<Command> commands = {
      {"example1", "obstacle-constrained reference solve", example1},
      {"example2", "penalty continuation and error table", example2},
      {"convergence", "manufactured-solution convergence study", convergence},
      {"gradcheck", "adjoint and derivative checks", gradcheck},
      {"sensitivity", "critical cone and directional derivative study", sensitivity},
  };
  std::vector<CLI::App*> subs;
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    add_common(sub, args);
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    const auto cfg = resolve(args);
    for (std::size_t i = 0; i < commands.size(); ++i) {
      if (subs[i]->parsed()) return commands[i].run(cfg);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSolverError;
  }
  return kConfigError;
}
