// SPDX-License-Identifier: Apache-2.0

#include "vicontrol/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vicontrol/errors.hpp"

namespace vicontrol {

namespace {

std::size_t count(const std::vector<char>& v) { return static_cast<std::size_t>(std::count(v.begin(), v.end(), 1)); }

void check_cone(const CriticalCone& cone, std::size_t n) {
  if (cone.zero_nodes.size() != n || cone.nonpositive_nodes.size() != n || cone.free_nodes.size() != n) {
    throw DimensionError("critical cone size does not match the problem");
  }
}

}  // namespace

std::size_t CriticalCone::count_zero() const { return count(zero_nodes); }
std::size_t CriticalCone::count_nonpositive() const { return count(nonpositive_nodes); }
std::size_t CriticalCone::count_free() const { return count(free_nodes); }

CriticalCone build_critical_cone(const StructuredMesh& mesh, const VISolution& sol, double tol) {
  const std::size_t n = mesh.num_nodes();
  if (sol.active.size() != n || sol.lambda.size() != n) throw DimensionError("build_critical_cone: size mismatch");
  const double threshold = tol * sol.f_norm;
  CriticalCone cone;
  cone.zero_nodes.assign(n, 0);
  cone.nonpositive_nodes.assign(n, 0);
  cone.free_nodes.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (mesh.is_boundary(i)) continue;
    if (!sol.active[i]) {
      cone.free_nodes[i] = 1;
    } else if (sol.lambda[i] > threshold) {
      cone.zero_nodes[i] = 1;
    } else {
      cone.nonpositive_nodes[i] = 1;
    }
  }
  return cone;
}

ConeSolution solve_cone_vi(const CsrMatrix& k, std::span<const double> rhs, std::span<const double> lumped,
                           const CriticalCone& cone, const PdasConfig& cfg) {
  const std::size_t n = k.rows();
  check_cone(cone, n);
  std::vector<char> fixed(n, 0);
  for (std::size_t i = 0; i < n; ++i) fixed[i] = (cone.nonpositive_nodes[i] || cone.free_nodes[i]) ? 0 : 1;
  const std::vector<double> upper(n, 0.0);

  BoundConstrainedQp qp;
  qp.k = &k;
  qp.rhs = rhs;
  qp.lumped = lumped;
  qp.upper = upper;
  qp.fixed = &fixed;
  qp.bounded = &cone.nonpositive_nodes;
  // Only a settled active set is accepted, so u~ <= 0 holds exactly.
  PdasConfig exact = cfg;
  exact.tol_feas = 0.0;
  auto r = solve_pdas(qp, exact);

  ConeSolution out;
  out.u = std::move(r.x);
  out.iterations = r.iterations;
  const auto ku = k.multiply(out.u);
  out.lambda.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (cone.zero_nodes[i] || cone.nonpositive_nodes[i]) out.lambda[i] = (rhs[i] - ku[i]) / lumped[i];
  }
  return out;
}

namespace {

std::vector<double> derivative_rhs(const FeSpace& space, const MatrixControlField& d, std::span<const double> u) {
  if (d.size() != space.size() || u.size() != space.size()) throw DimensionError("directional derivative: size mismatch");
  auto rhs = assemble_coefficient_form(space, d).multiply(u);
  for (auto& v : rhs) v = -v;
  zero_boundary(space.mesh(), rhs);
  return rhs;
}

}  // namespace

ConeSolution directional_derivative(const FeSpace& space, const MatrixControlField& q, const MatrixControlField& d,
                                    std::span<const double> u, const CriticalCone& cone, const PdasConfig& cfg) {
  const auto rhs = derivative_rhs(space, d, u);
  return solve_cone_vi(assemble_stiffness(space, q), rhs, space.lumped_mass(), cone, cfg);
}

double DerivativeResiduals::max() const { return std::max({cone_feasibility, polarity, complementarity}); }

DerivativeResiduals cone_residuals(const CsrMatrix& k, std::span<const double> rhs, std::span<const double> lumped,
                                   std::span<const double> u_tilde, const CriticalCone& cone) {
  const std::size_t n = k.rows();
  check_cone(cone, n);
  if (rhs.size() != n || lumped.size() != n || u_tilde.size() != n) throw DimensionError("cone_residuals: size mismatch");
  const auto ku = k.multiply(u_tilde);
  DerivativeResiduals r;
  double comp = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lambda = (rhs[i] - ku[i]) / lumped[i];
    if (cone.zero_nodes[i]) {
      r.cone_feasibility = std::max(r.cone_feasibility, std::abs(u_tilde[i]));
    } else if (cone.nonpositive_nodes[i]) {
      r.cone_feasibility = std::max(r.cone_feasibility, u_tilde[i]);
      r.polarity = std::max(r.polarity, -lambda);
      comp += lumped[i] * lambda * u_tilde[i];
    } else if (cone.free_nodes[i]) {
      r.polarity = std::max(r.polarity, std::abs(lambda));
    }
  }
  r.complementarity = std::abs(comp);
  return r;
}

DerivativeResiduals derivative_complementarity_check(const FeSpace& space, const MatrixControlField& q,
                                                     const MatrixControlField& d, std::span<const double> u,
                                                     std::span<const double> u_tilde, const CriticalCone& cone) {
  const auto rhs = derivative_rhs(space, d, u);
  return cone_residuals(assemble_stiffness(space, q), rhs, space.lumped_mass(), u_tilde, cone);
}

FirstOrderReport primal_first_order_check(const FeSpace& space, const MatrixControlField& q, const VISolution& sol,
                                          std::span<const MatrixControlField> candidates, const ObjectiveConfig& cfg,
                                          const PdasConfig& pdas) {
  const auto cone = build_critical_cone(space.mesh(), sol, pdas.active_tol);
  const auto k = assemble_stiffness(space, q);
  std::vector<double> diff(space.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = sol.u[i] - cfg.u_d[i];
  const auto m_diff = space.mass().multiply(diff);
  const auto q_off = q - cfg.q_d;
  MatrixControlField barrier_dual(space.size());
  if (cfg.beta != 0.0) {
    auto b = barrier(space, q, cfg.bounds);
    if (!b.feasible) throw CoefficientError("primal_first_order_check: control is not strictly admissible");
    barrier_dual = std::move(b.derivative);
  }

  FirstOrderReport report;
  report.min_value = std::numeric_limits<double>::infinity();
  for (const auto& c : candidates) {
    const auto d = c - q;
    const auto rhs = derivative_rhs(space, d, sol.u);
    const auto du = solve_cone_vi(k, rhs, space.lumped_mass(), cone, pdas).u;
    const double tracking = dot(m_diff, du);
    const double tikhonov = cfg.alpha * control_inner(space, q_off, d);
    const double bar = cfg.beta * barrier_dual.pair(d);
    const double v = tracking + tikhonov + bar;
    report.values.push_back(v);
    report.min_value = std::min(report.min_value, v);
    report.scale = std::max(report.scale, std::abs(tracking) + std::abs(tikhonov) + std::abs(bar));
  }
  if (candidates.empty()) report.min_value = 0.0;
  return report;
}

}  // namespace vicontrol
