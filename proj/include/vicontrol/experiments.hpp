// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "vicontrol/control_field.hpp"
#include "vicontrol/fem.hpp"
#include "vicontrol/obstacle_vi.hpp"
#include "vicontrol/optimizer.hpp"
#include "vicontrol/penalized_state.hpp"
#include "vicontrol/sensitivity.hpp"

namespace vicontrol {

/// Every knob of the experiment runners. Keys of the config file and of
/// key=value overrides are the field names.
struct ExperimentConfig {
  int level = 5;
  std::vector<int> levels = {3, 4, 5};  // convergence study
  double alpha = 0.1;
  double beta = 1e-4;
  std::vector<double> gamma_list = {1e0, 1e3, 1e6, 1e9, 1e12};
  double psi = 0.5;
  double q_min = 0.5;
  double q_max = 10.0;
  double c = 1.0;
  Sym2 q_init{2.0, 2.0, -1.0};
  bool desired_control = true;  // q_d = diag(1 + x^2, 1); false gives q_d = 0

  // outer loop
  double rel_tol = 1e-8;
  int max_iters = 20000;
  StepRule step_rule = StepRule::BarzilaiBorwein;
  ObstacleAdjoint adjoint = ObstacleAdjoint::ActiveSet;
  double gamma_adj = 1e12;

  // inner solvers
  PenaltyQuadrature penalty_quadrature = PenaltyQuadrature::Lumped;
  double newton_tol = 1e-11;
  int pdas_max_iters = 200;
  double active_tol = 1e-8;

  // convergence study
  bool convergence_obstacle = false;

  // gradient and derivative checks
  double gradcheck_gamma = 1e3;
  int gradcheck_controls = 3;
  int gradcheck_directions = 5;
  double fd_step = 1e-4;
  double gradcheck_tol = 1e-4;
  std::vector<double> sensitivity_steps = {1e-2, 1e-3, 1e-4};
  int sensitivity_directions = 3;
  int first_order_candidates = 20;

  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 0;

  [[nodiscard]] SpectralBounds bounds() const { return {q_min, q_max}; }
  [[nodiscard]] PdasConfig pdas() const;
  [[nodiscard]] LoopConfig loop() const;
  [[nodiscard]] PenaltyConfig penalty(double gamma) const;
};

/// Flat "key = value" file; '#' starts a comment. Unknown keys throw ConfigError.
[[nodiscard]] ExperimentConfig load_config(const std::filesystem::path& path);
void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value);
/// "key=value"
void apply_override(ExperimentConfig& cfg, const std::string& assignment);
/// Throws ConfigError on out-of-range values.
void validate(const ExperimentConfig& cfg);
/// All keys in file syntax; load_config(dump_config(cfg)) reproduces cfg.
[[nodiscard]] std::string dump_config(const ExperimentConfig& cfg);

/// Discrete data of the model problem: f with -div(q_d grad u_d) = f, u_d = (1 - x^2)(1 - y^2).
struct Problem {
  explicit Problem(const ExperimentConfig& cfg, int level);
  FeSpace space;
  ScalarField f_load;
  ObjectiveConfig objective;
  MatrixControlField q_init;
};

[[nodiscard]] double model_load(double x, double y);
[[nodiscard]] double model_state(double x, double y);
[[nodiscard]] Sym2 model_control(double x, double y);

/// Independent uniform entries in [-amplitude, amplitude] for each nodal component.
[[nodiscard]] MatrixControlField random_field(std::size_t n, std::mt19937_64& rng, double amplitude);
/// theta (P(q + r) - q): q + t d stays admissible for t in [0, 1/theta].
[[nodiscard]] MatrixControlField admissible_direction(const MatrixControlField& q, const MatrixControlField& r,
                                                      SpectralBounds bounds, double theta = 0.5);

struct Example1Result {
  OptResult result;
  VISolution state;  // obstacle solution at the final control
  std::size_t contact_nodes = 0;
  double max_lambda = 0.0;
  double multiplier_ratio = 0.0;  // ||lambda|| / ||f||
  double gradient_ratio = 0.0;    // ||grad u|| q_min / (q_max ||f||)
  ComplementarityResiduals residuals;
  std::size_t infeasible_iterates = 0;
  std::vector<std::filesystem::path> files;
};

struct ResultRow {
  double gamma = 0.0;
  double err_u = 0.0;
  double err_q = 0.0;
};

struct Example2Result {
  Example1Result reference;
  std::vector<GammaLeg> legs;
  std::vector<ResultRow> rows;
  std::size_t infeasible_iterates = 0;
  std::vector<std::filesystem::path> files;
};

struct ConvergenceRow {
  int level = 0;
  double h = 0.0;
  double error = 0.0;
  double rate = 0.0;  // NaN on the first row
};

struct ConvergenceResult {
  std::vector<ConvergenceRow> rows;
  std::vector<std::filesystem::path> files;
};

struct AdjointCheckRow {
  int control = 0;
  int direction = 0;
  double adjoint = 0.0;
  double fd = 0.0;
  double rel_error = 0.0;
  double fd_half = 0.0;  // central difference with half the step
  double rel_error_half = 0.0;
};

struct QuotientRow {
  std::string regime;  // "contact" or "no-contact"
  int direction = 0;
  double t = 0.0;
  double error = 0.0;  // ||(S(q + t d) - S(q)) / t - S'(q; d)||_L2
  double order = 0.0;  // NaN on the first step of each direction
};

struct GradcheckResult {
  std::vector<AdjointCheckRow> adjoint_rows;
  double max_rel_error = 0.0;
  std::vector<QuotientRow> quotient_rows;
  bool quotients_decrease = false;
  double zero_direction_norm = 0.0;
  bool passed = false;
  std::vector<std::filesystem::path> files;
};

struct SensitivityResult {
  std::size_t zero_nodes = 0;
  std::size_t nonpositive_nodes = 0;
  std::size_t free_nodes = 0;
  std::vector<QuotientRow> rows;
  bool contact_monotone = false;
  double min_no_contact_order = 0.0;
  double max_derivative_residual = 0.0;
  FirstOrderReport first_order_optimum;
  FirstOrderReport first_order_initial;
  bool passed = false;
  std::vector<std::filesystem::path> files;
};

/// Obstacle-constrained reference problem at cfg.level.
[[nodiscard]] Example1Result run_example1(const ExperimentConfig& cfg);
/// Gamma continuation against the Example 1 reference on the same mesh.
[[nodiscard]] Example2Result run_example2(const ExperimentConfig& cfg);
/// Manufactured-solution errors for fixed q = q_d over cfg.levels.
[[nodiscard]] ConvergenceResult run_convergence(const ExperimentConfig& cfg);
/// Adjoint against central differences of the penalized reduced objective,
/// and S'(q; d) against difference quotients at q_init.
[[nodiscard]] GradcheckResult run_gradcheck(const ExperimentConfig& cfg);
/// Critical cone, derivative quotients and first-order check at the Example 1 optimum.
[[nodiscard]] SensitivityResult run_sensitivity(const ExperimentConfig& cfg);

/// "gamma,err_u_L2,err_q_L2" table.
[[nodiscard]] std::string format_result_table(const std::vector<ResultRow>& rows);

}  // namespace vicontrol
