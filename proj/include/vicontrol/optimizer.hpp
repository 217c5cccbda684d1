// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vicontrol/control_field.hpp"
#include "vicontrol/fem.hpp"
#include "vicontrol/obstacle_vi.hpp"
#include "vicontrol/penalized_state.hpp"

namespace vicontrol {

/// J(q, u) + beta B(q) with J = 1/2 ||u - u_d||^2 + alpha/2 ||q - q_d||^2.
struct ObjectiveConfig {
  double alpha = 0.1;
  double beta = 1e-4;
  ScalarField u_d;
  MatrixControlField q_d;
  SpectralBounds bounds;
};

struct ObjectiveParts {
  double tracking = 0.0;  // 1/2 ||u - u_d||^2
  double tikhonov = 0.0;  // alpha/2 ||q - q_d||^2
  double barrier = 0.0;   // beta B(q)
  [[nodiscard]] double total() const noexcept { return tracking + tikhonov + barrier; }
};

struct FeasibilityMargins {
  double min_det_lower = 0.0;
  double min_det_upper = 0.0;
  double min_trace_lower = 0.0;
  double min_trace_upper = 0.0;
  [[nodiscard]] bool strictly_feasible() const noexcept {
    return min_det_lower > 0.0 && min_det_upper > 0.0 && min_trace_lower > 0.0 && min_trace_upper > 0.0;
  }
};
[[nodiscard]] FeasibilityMargins feasibility_margins(const MatrixControlField& q, SpectralBounds bounds);

/// One accepted iterate of the outer loop, as logged.
struct IterationRecord {
  int iteration = 0;
  ObjectiveParts parts;
  double grad_norm = 0.0;
  double stationarity = 0.0;
  double step = 0.0;        // step accepted to reach this iterate (0 for the start)
  int backtracks = 0;
  double violation = 0.0;   // max(u - psi)^+
  FeasibilityMargins margins;
};

struct OptIterate {
  MatrixControlField q;
  ScalarField u;
  ScalarField p;
  ScalarField lambda;         // obstacle multiplier, or lumped penalty density
  std::vector<char> active;   // obstacle active set (empty for the penalized model)
  ObjectiveParts parts;
  MatrixControlField grad;    // L2 Riesz representer of the reduced derivative
  double grad_norm = 0.0;
  double step = 0.0;
};

enum class Termination { Converged, StepTolerance, MaxIterations, Stagnation };
[[nodiscard]] std::string to_string(Termination t);

struct OptResult {
  OptIterate final;
  std::vector<IterationRecord> history;
  Termination termination = Termination::MaxIterations;
  double initial_stationarity = 0.0;
  int state_solves = 0;
};

enum class StepRule { Constant, BarzilaiBorwein };

struct LoopConfig {
  int max_iters = 5000;
  StepRule step_rule = StepRule::Constant;
  double step_init = 1.0;
  double step_max = 1e3;
  double backtrack = 0.5;
  int max_backtracks = 40;
  double sigma = 1e-4;
  double rel_tol = 1e-8;             // stationarity <= rel_tol * (1 + initial stationarity)
  double step_tol = 1e-13;           // ||q+ - q|| below this stops the loop
  double projection_margin = 1e-9;
  double stationarity_step = 1.0;    // s in ||q - P(q - s G)|| / s
  std::function<void(const IterationRecord&)> on_iteration;
};

/// State solver used by the reduced-space loop.
struct StateEval {
  ScalarField u;
  ScalarField lambda;
  std::vector<char> active;
};

class StateModel {
 public:
  virtual ~StateModel() = default;
  /// State for the assembled stiffness of q; `warm` is the previous accepted state.
  [[nodiscard]] virtual StateEval solve_state(const CsrMatrix& stiffness, const StateEval* warm) const = 0;
  /// Adjoint for the tracking term 1/2 ||u - u_d||^2.
  [[nodiscard]] virtual ScalarField solve_adjoint(const CsrMatrix& stiffness, const StateEval& state,
                                                  std::span<const double> u_d) const = 0;
  [[nodiscard]] virtual double psi() const noexcept = 0;
};

/// Cubic-penalty state equation solved by Newton's method.
class PenalizedModel final : public StateModel {
 public:
  PenalizedModel(const FeSpace& space, ScalarField f_load, PenaltyConfig cfg)
      : space_(space), f_load_(std::move(f_load)), cfg_(cfg) {}
  [[nodiscard]] StateEval solve_state(const CsrMatrix& stiffness, const StateEval* warm) const override;
  [[nodiscard]] ScalarField solve_adjoint(const CsrMatrix& stiffness, const StateEval& state,
                                          std::span<const double> u_d) const override;
  [[nodiscard]] double psi() const noexcept override { return cfg_.psi; }
  [[nodiscard]] const PenaltyConfig& config() const noexcept { return cfg_; }

 private:
  const FeSpace& space_;
  ScalarField f_load_;
  PenaltyConfig cfg_;
};

/// How the obstacle-constrained model builds its adjoint.
enum class ObstacleAdjoint {
  /// p = 0 on the active set, adjoint equation on the inactive nodes. This is
  /// the exact derivative of the discrete reduced objective wherever the
  /// active set is locally stable.
  ActiveSet,
  /// Penalized adjoint at gamma_adj with the lumped penalty curvature taken at
  /// the penalized state matching the VI multiplier: D_i = m_i 3 gamma^(1/3) lambda_i^(2/3).
  PenalizedSurrogate,
};

/// Obstacle problem state solved by the primal-dual active set method.
class ObstacleModel final : public StateModel {
 public:
  ObstacleModel(const FeSpace& space, ScalarField f_load, double psi, PdasConfig pdas,
                ObstacleAdjoint adjoint = ObstacleAdjoint::ActiveSet, double gamma_adj = 1e12)
      : space_(space), f_load_(std::move(f_load)), psi_(psi), pdas_(pdas), adjoint_(adjoint), gamma_adj_(gamma_adj) {}
  [[nodiscard]] StateEval solve_state(const CsrMatrix& stiffness, const StateEval* warm) const override;
  [[nodiscard]] ScalarField solve_adjoint(const CsrMatrix& stiffness, const StateEval& state,
                                          std::span<const double> u_d) const override;
  [[nodiscard]] double psi() const noexcept override { return psi_; }

 private:
  const FeSpace& space_;
  ScalarField f_load_;
  double psi_;
  PdasConfig pdas_;
  ObstacleAdjoint adjoint_;
  double gamma_adj_;
};

/// Objective parts at (q, u); parts.barrier is +inf for inadmissible q.
[[nodiscard]] ObjectiveParts evaluate_objective(const FeSpace& space, const MatrixControlField& q,
                                                std::span<const double> u, const ObjectiveConfig& cfg);

struct ReducedGradient {
  MatrixControlField dual;   // partial derivatives w.r.t. the nodal components
  MatrixControlField field;  // Riesz representer: alpha (q - q_d) + beta B'(q) - sym(grad u (x) grad p)
};

/// Derivative of q -> J(q, u(q)) + beta B(q) given the adjoint p of the state u.
/// Throws CoefficientError for inadmissible q when beta > 0.
[[nodiscard]] ReducedGradient reduced_gradient(const FeSpace& space, const MatrixControlField& q,
                                               std::span<const double> u, std::span<const double> p,
                                               const ObjectiveConfig& cfg);

/// Projected-gradient stationarity measure ||q - P(q - s G)|| / s.
[[nodiscard]] double stationarity_residual_vi(const FeSpace& space, const MatrixControlField& q,
                                              const MatrixControlField& grad, const ObjectiveConfig& cfg,
                                              double s = 1.0, double margin = 0.0);

/// Reduced-space projected gradient method with Armijo backtracking.
/// q0 must be strictly admissible; every trial point is checked before acceptance.
[[nodiscard]] OptResult minimize(const FeSpace& space, const MatrixControlField& q0, const ObjectiveConfig& cfg,
                                 const StateModel& model, const LoopConfig& loop,
                                 const StateEval* initial_state = nullptr);

/// Convenience wrapper for the penalized problem.
[[nodiscard]] OptResult minimize(const FeSpace& space, const MatrixControlField& q0, const ObjectiveConfig& cfg,
                                 std::span<const double> f_load, const PenaltyConfig& pen, const LoopConfig& loop);

/// Obstacle-constrained reference problem.
[[nodiscard]] OptResult solve_vi_constrained(const FeSpace& space, const MatrixControlField& q0,
                                             const ObjectiveConfig& cfg, std::span<const double> f_load, double psi,
                                             const PdasConfig& pdas, const LoopConfig& loop,
                                             ObstacleAdjoint adjoint = ObstacleAdjoint::ActiveSet,
                                             double gamma_adj = 1e12);

struct GammaLeg {
  double gamma = 0.0;
  OptResult result;
  double err_u = 0.0;  // ||u_gamma - u_ref|| if a reference was given
  double err_q = 0.0;  // ||q_gamma - q_ref||
};

struct Reference {
  const MatrixControlField* q = nullptr;
  const ScalarField* u = nullptr;
};

/// Runs minimize for each gamma (strictly increasing), warm-starting each leg
/// from the previous solution.
[[nodiscard]] std::vector<GammaLeg> gamma_continuation(const FeSpace& space, const MatrixControlField& q0,
                                                       const ObjectiveConfig& cfg, std::span<const double> f_load,
                                                       const PenaltyConfig& pen, std::span<const double> gammas,
                                                       const LoopConfig& loop, Reference reference = {});

}  // namespace vicontrol
