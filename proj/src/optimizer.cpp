// SPDX-License-Identifier: Apache-2.0

#include "vicontrol/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vicontrol/errors.hpp"
#include "vicontrol/linear_solver.hpp"

namespace vicontrol {

std::string to_string(Termination t) {
  switch (t) {
    case Termination::Converged: return "converged";
    case Termination::StepTolerance: return "step-tolerance";
    case Termination::MaxIterations: return "max-iterations";
    case Termination::Stagnation: return "stagnation";
  }
  return "unknown";
}

FeasibilityMargins feasibility_margins(const MatrixControlField& q, SpectralBounds bounds) {
  const auto r = check_admissible(q, bounds);
  return {r.min_det_lower, r.min_det_upper, r.min_trace_lower, r.min_trace_upper};
}

StateEval PenalizedModel::solve_state(const CsrMatrix& stiffness, const StateEval* warm) const {
  StateEval s;
  s.u = solve_penalized(space_, stiffness, f_load_, cfg_, warm ? &warm->u : nullptr);
  s.lambda = penalty_residual_as_multiplier(space_, s.u, cfg_);
  return s;
}

ScalarField PenalizedModel::solve_adjoint(const CsrMatrix& stiffness, const StateEval& state,
                                          std::span<const double> u_d) const {
  return vicontrol::solve_adjoint(space_, stiffness, state.u, u_d, cfg_);
}

StateEval ObstacleModel::solve_state(const CsrMatrix& stiffness, const StateEval* warm) const {
  auto sol = solve_vi(space_, stiffness, f_load_, psi_, pdas_, warm && !warm->active.empty() ? &warm->active : nullptr);
  return {std::move(sol.u), std::move(sol.lambda), std::move(sol.active)};
}

ScalarField ObstacleModel::solve_adjoint(const CsrMatrix& stiffness, const StateEval& state,
                                         std::span<const double> u_d) const {
  const auto& mesh = space_.mesh();
  std::vector<double> diff(state.u.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = state.u[i] - u_d[i];
  auto rhs = space_.mass().multiply(diff);
  zero_boundary(mesh, rhs);

  ScalarField p(space_.size(), 0.0);
  CgOptions options;
  options.tol = pdas_.linear_tol;
  if (adjoint_ == ObstacleAdjoint::ActiveSet) {
    std::vector<char> fixed = mesh.boundary_mask();
    for (std::size_t i = 0; i < fixed.size(); ++i) fixed[i] = (fixed[i] || state.active[i]) ? 1 : 0;
    solve_spd(stiffness, rhs, p, options, &fixed);
    return p;
  }
  // gamma max(u - psi)^3 = lambda  =>  3 gamma max(u - psi)^2 = 3 gamma^(1/3) lambda^(2/3)
  CsrMatrix op = stiffness;
  const double scale = 3.0 * std::cbrt(gamma_adj_);
  for (std::size_t i = 0; i < space_.size(); ++i) {
    const double l = state.lambda[i];
    if (!(l > 0.0)) continue;
    op.values()[op.find(i, i)] += space_.lumped_mass()[i] * scale * std::cbrt(l * l);
  }
  solve_spd(op, rhs, p, options, &mesh.boundary_mask());
  return p;
}

ObjectiveParts evaluate_objective(const FeSpace& space, const MatrixControlField& q, std::span<const double> u,
                                  const ObjectiveConfig& cfg) {
  if (u.size() != space.size() || cfg.u_d.size() != space.size() || cfg.q_d.size() != space.size()) {
    throw DimensionError("evaluate_objective: size mismatch");
  }
  ObjectiveParts parts;
  std::vector<double> diff(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) diff[i] = u[i] - cfg.u_d[i];
  const double track = l2_norm(space, diff);
  parts.tracking = 0.5 * track * track;
  const double dq = control_norm(space, q - cfg.q_d);
  parts.tikhonov = 0.5 * cfg.alpha * dq * dq;
  if (cfg.beta != 0.0) {
    const auto b = barrier(space, q, cfg.bounds);
    parts.barrier = b.feasible ? cfg.beta * b.value : std::numeric_limits<double>::infinity();
  } else if (!check_admissible(q, cfg.bounds).admissible) {
    parts.barrier = std::numeric_limits<double>::infinity();
  }
  return parts;
}

ReducedGradient reduced_gradient(const FeSpace& space, const MatrixControlField& q, std::span<const double> u,
                                 std::span<const double> p, const ObjectiveConfig& cfg) {
  if (q.size() != space.size() || u.size() != space.size() || p.size() != space.size()) {
    throw DimensionError("reduced_gradient: size mismatch");
  }
  ReducedGradient g;
  g.dual = mass_apply(space, q - cfg.q_d).scaled(cfg.alpha);
  if (cfg.beta != 0.0) {
    const auto b = barrier(space, q, cfg.bounds);
    if (!b.feasible) throw CoefficientError("reduced_gradient: control is not admissible");
    g.dual.axpy(cfg.beta, b.derivative);
  }

  const auto& mesh = space.mesh();
  const auto& rule = Q1Rule::get();
  const double area = mesh.h() * mesh.h() * rule.weight;
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const auto nodes = mesh.cell_nodes(c);
    const auto su = sample_cell(space, c, u);
    const auto sp = sample_cell(space, c, p);
    for (std::size_t qp = 0; qp < Q1Rule::kPoints; ++qp) {
      const double t11 = su.dx[qp] * sp.dx[qp];
      const double t22 = su.dy[qp] * sp.dy[qp];
      const double t12 = su.dx[qp] * sp.dy[qp] + su.dy[qp] * sp.dx[qp];
      for (std::size_t a = 0; a < 4; ++a) {
        const double w = area * rule.phi[qp][a];
        g.dual.comp[0][nodes[a]] -= w * t11;
        g.dual.comp[1][nodes[a]] -= w * t22;
        g.dual.comp[2][nodes[a]] -= w * t12;
      }
    }
  }
  g.field = riesz(space, g.dual);
  return g;
}

double stationarity_residual_vi(const FeSpace& space, const MatrixControlField& q, const MatrixControlField& grad,
                                const ObjectiveConfig& cfg, double s, double margin) {
  MatrixControlField trial = q;
  trial.axpy(-s, grad);
  return control_norm(space, q - project_spectral(trial, cfg.bounds, margin)) / s;
}

namespace {

IterationRecord make_record(int iteration, const OptIterate& it, double stationarity, int backtracks, double psi,
                            SpectralBounds bounds) {
  IterationRecord r;
  r.iteration = iteration;
  r.parts = it.parts;
  r.grad_norm = it.grad_norm;
  r.stationarity = stationarity;
  r.step = it.step;
  r.backtracks = backtracks;
  r.violation = max_violation(it.u, psi);
  r.margins = feasibility_margins(it.q, bounds);
  return r;
}

}  // namespace

OptResult minimize(const FeSpace& space, const MatrixControlField& q0, const ObjectiveConfig& cfg,
                   const StateModel& model, const LoopConfig& loop, const StateEval* initial_state) {
  if (!check_admissible(q0, cfg.bounds).admissible) {
    throw CoefficientError("minimize: initial control is not strictly admissible");
  }
  OptResult result;
  OptIterate& cur = result.final;
  cur.q = q0;
  CsrMatrix stiffness = assemble_stiffness(space, cur.q);
  StateEval state = model.solve_state(stiffness, initial_state);
  ++result.state_solves;
  cur.parts = evaluate_objective(space, cur.q, state.u, cfg);
  if (!std::isfinite(cur.parts.total())) throw CoefficientError("minimize: objective is not finite at the start");

  const auto refresh_gradient = [&] {
    cur.u = state.u;
    cur.lambda = state.lambda;
    cur.active = state.active;
    cur.p = model.solve_adjoint(stiffness, state, cfg.u_d);
    cur.grad = reduced_gradient(space, cur.q, cur.u, cur.p, cfg).field;
    cur.grad_norm = control_norm(space, cur.grad);
    return stationarity_residual_vi(space, cur.q, cur.grad, cfg, loop.stationarity_step, 0.0);
  };
  double stationarity = refresh_gradient();
  result.initial_stationarity = stationarity;
  result.history.push_back(make_record(0, cur, stationarity, 0, model.psi(), cfg.bounds));
  if (loop.on_iteration) loop.on_iteration(result.history.back());

  const double target = loop.rel_tol * (1.0 + result.initial_stationarity);
  MatrixControlField prev_q, prev_grad;
  bool have_prev = false;
  result.termination = Termination::MaxIterations;

  for (int it = 1; it <= loop.max_iters; ++it) {
    if (stationarity <= target) {
      result.termination = Termination::Converged;
      break;
    }
    double step = loop.step_init;
    if (loop.step_rule == StepRule::BarzilaiBorwein && have_prev) {
      const auto s = cur.q - prev_q;
      const auto y = cur.grad - prev_grad;
      const double sy = control_inner(space, s, y);
      if (sy > 0.0) step = std::clamp(control_inner(space, s, s) / sy, 1e-8, loop.step_max);
    }

    bool accepted = false;
    int backtracks = 0;
    MatrixControlField trial;
    StateEval trial_state;
    CsrMatrix trial_stiffness;
    ObjectiveParts trial_parts;
    const double decrease_unit = loop.sigma * cur.grad_norm * cur.grad_norm;
    for (; backtracks <= loop.max_backtracks; ++backtracks, step *= loop.backtrack) {
      trial = cur.q;
      trial.axpy(-step, cur.grad);
      trial = project_spectral(trial, cfg.bounds, loop.projection_margin);
      if (!check_admissible(trial, cfg.bounds).admissible) continue;
      try {
        trial_stiffness = assemble_stiffness(space, trial);
        trial_state = model.solve_state(trial_stiffness, &state);
      } catch (const SolverError&) {
        continue;
      } catch (const CoefficientError&) {
        continue;
      }
      ++result.state_solves;
      trial_parts = evaluate_objective(space, trial, trial_state.u, cfg);
      if (!std::isfinite(trial_parts.total())) continue;
      if (trial_parts.total() <= cur.parts.total() - step * decrease_unit) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      result.termination = Termination::Stagnation;
      break;
    }

    const double move = control_norm(space, trial - cur.q);
    prev_q = cur.q;
    prev_grad = cur.grad;
    have_prev = true;
    cur.q = std::move(trial);
    cur.parts = trial_parts;
    cur.step = step;
    stiffness = std::move(trial_stiffness);
    state = std::move(trial_state);
    stationarity = refresh_gradient();
    result.history.push_back(make_record(it, cur, stationarity, backtracks, model.psi(), cfg.bounds));
    if (loop.on_iteration) loop.on_iteration(result.history.back());
    if (move < loop.step_tol) {
      result.termination = Termination::StepTolerance;
      break;
    }
    if (it == loop.max_iters && stationarity <= target) result.termination = Termination::Converged;
  }
  return result;
}

OptResult minimize(const FeSpace& space, const MatrixControlField& q0, const ObjectiveConfig& cfg,
                   std::span<const double> f_load, const PenaltyConfig& pen, const LoopConfig& loop) {
  const PenalizedModel model(space, ScalarField(f_load.begin(), f_load.end()), pen);
  return minimize(space, q0, cfg, model, loop);
}

OptResult solve_vi_constrained(const FeSpace& space, const MatrixControlField& q0, const ObjectiveConfig& cfg,
                               std::span<const double> f_load, double psi, const PdasConfig& pdas,
                               const LoopConfig& loop, ObstacleAdjoint adjoint, double gamma_adj) {
  const ObstacleModel model(space, ScalarField(f_load.begin(), f_load.end()), psi, pdas, adjoint, gamma_adj);
  return minimize(space, q0, cfg, model, loop);
}

std::vector<GammaLeg> gamma_continuation(const FeSpace& space, const MatrixControlField& q0,
                                         const ObjectiveConfig& cfg, std::span<const double> f_load,
                                         const PenaltyConfig& pen, std::span<const double> gammas,
                                         const LoopConfig& loop, Reference reference) {
  for (std::size_t i = 1; i < gammas.size(); ++i) {
    if (!(gammas[i] > gammas[i - 1])) throw ConfigError("gamma_continuation: gammas must be strictly increasing");
  }
  std::vector<GammaLeg> legs;
  MatrixControlField q = q0;
  StateEval warm;
  bool have_warm = false;
  for (double gamma : gammas) {
    PenaltyConfig leg_cfg = pen;
    leg_cfg.gamma = gamma;
    const PenalizedModel model(space, ScalarField(f_load.begin(), f_load.end()), leg_cfg);
    GammaLeg leg;
    leg.gamma = gamma;
    leg.result = minimize(space, q, cfg, model, loop, have_warm ? &warm : nullptr);
    const auto& fin = leg.result.final;
    if (reference.u) {
      std::vector<double> du(fin.u.size());
      for (std::size_t i = 0; i < du.size(); ++i) du[i] = fin.u[i] - (*reference.u)[i];
      leg.err_u = l2_norm(space, du);
    }
    if (reference.q) leg.err_q = control_norm(space, fin.q - *reference.q);
    q = fin.q;
    warm = {fin.u, fin.lambda, {}};
    have_warm = true;
    legs.push_back(std::move(leg));
  }
  return legs;
}

}  // namespace vicontrol
