// SPDX-License-Identifier: Apache-2.0

#include "vicontrol/penalized_state.hpp"

#include <algorithm>
#include <sstream>

#include "vicontrol/errors.hpp"
#include "vicontrol/linear_solver.hpp"

namespace vicontrol {

std::vector<double> assemble_penalty(const FeSpace& space, std::span<const double> u, const PenaltyConfig& cfg) {
  const auto& mesh = space.mesh();
  const auto& rule = Q1Rule::get();
  const double area = mesh.h() * mesh.h() * rule.weight;
  std::vector<double> out(space.size(), 0.0);
  if (cfg.gamma == 0.0) return out;
  if (cfg.quadrature == PenaltyQuadrature::Lumped) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double excess = std::max(u[i] - cfg.psi, 0.0);
      out[i] = space.lumped_mass()[i] * cfg.gamma * excess * excess * excess;
    }
    zero_boundary(mesh, out);
    return out;
  }
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const auto nodes = mesh.cell_nodes(c);
    if (std::all_of(nodes.begin(), nodes.end(), [&](std::size_t n) { return u[n] <= cfg.psi; })) continue;
    for (std::size_t qp = 0; qp < Q1Rule::kPoints; ++qp) {
      double v = 0.0;
      for (std::size_t a = 0; a < 4; ++a) v += rule.phi[qp][a] * u[nodes[a]];
      const double excess = std::max(v - cfg.psi, 0.0);
      if (excess == 0.0) continue;
      const double r = cfg.gamma * excess * excess * excess;
      for (std::size_t a = 0; a < 4; ++a) out[nodes[a]] += area * r * rule.phi[qp][a];
    }
  }
  return out;
}

namespace {

std::vector<double> jacobian_weights(const FeSpace& space, std::span<const double> u, const PenaltyConfig& cfg) {
  const auto& mesh = space.mesh();
  const auto& rule = Q1Rule::get();
  std::vector<double> w(mesh.num_cells() * Q1Rule::kPoints, 0.0);
  if (cfg.gamma == 0.0) return w;
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const auto nodes = mesh.cell_nodes(c);
    for (std::size_t qp = 0; qp < Q1Rule::kPoints; ++qp) {
      double v = 0.0;
      for (std::size_t a = 0; a < 4; ++a) v += rule.phi[qp][a] * u[nodes[a]];
      const double excess = std::max(v - cfg.psi, 0.0);
      w[c * Q1Rule::kPoints + qp] = 3.0 * cfg.gamma * excess * excess;
    }
  }
  return w;
}

// R(u) = K u + N(u) - f on interior rows, zero on the boundary.
std::vector<double> state_residual(const FeSpace& space, const CsrMatrix& k, std::span<const double> u,
                                   std::span<const double> f, const PenaltyConfig& cfg) {
  auto r = k.multiply(u);
  const auto n = assemble_penalty(space, u, cfg);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] += n[i] - f[i];
  zero_boundary(space.mesh(), r);
  return r;
}

}  // namespace

CsrMatrix assemble_penalty_jacobian(const FeSpace& space, std::span<const double> u, const PenaltyConfig& cfg) {
  if (cfg.quadrature == PenaltyQuadrature::Lumped) {
    CsrMatrix d = space.zero_operator();
    if (cfg.gamma == 0.0) return d;
    for (std::size_t i = 0; i < u.size(); ++i) {
      if (space.mesh().is_boundary(i)) continue;
      const double excess = std::max(u[i] - cfg.psi, 0.0);
      d.values()[d.find(i, i)] = space.lumped_mass()[i] * 3.0 * cfg.gamma * excess * excess;
    }
    return d;
  }
  return assemble_weighted_mass(space, jacobian_weights(space, u, cfg));
}

ScalarField solve_penalized(const FeSpace& space, const CsrMatrix& stiffness, std::span<const double> f_load,
                            const PenaltyConfig& cfg, const ScalarField* initial, NewtonReport* report) {
  if (f_load.size() != space.size()) throw DimensionError("solve_penalized: load size does not match the mesh");
  if (cfg.gamma < 0.0) throw SolverError("solve_penalized: gamma must be nonnegative");
  const auto& mesh = space.mesh();

  ScalarField u = initial ? *initial : ScalarField(space.size(), 0.0);
  if (u.size() != space.size()) throw DimensionError("solve_penalized: initial guess size mismatch");
  zero_boundary(mesh, u);

  std::vector<double> f_interior(f_load.begin(), f_load.end());
  zero_boundary(mesh, f_interior);
  const double f_norm = norm2(f_interior);
  const double target = cfg.newton_tol * (f_norm > 0.0 ? f_norm : 1.0);

  NewtonReport local;
  auto residual = state_residual(space, stiffness, u, f_load, cfg);
  double r_norm = norm2(residual);
  local.residual_history.push_back(r_norm);

  CgOptions options;
  options.tol = cfg.linear_tol;
  std::vector<double> delta(space.size());
  std::vector<double> trial(space.size());
  while (r_norm > target) {
    if (local.iterations >= cfg.newton_max) {
      std::ostringstream msg;
      msg << "solve_penalized: Newton did not converge in " << cfg.newton_max << " iterations (residual " << r_norm
          << ", target " << target << ")";
      throw SolverError(msg.str(), local.residual_history);
    }
    CsrMatrix jac = stiffness;
    if (cfg.gamma != 0.0) jac.add_scaled(assemble_penalty_jacobian(space, u, cfg), 1.0);
    std::vector<double> rhs(residual);
    for (auto& v : rhs) v = -v;
    std::fill(delta.begin(), delta.end(), 0.0);
    local.linear_iterations += solve_spd(jac, rhs, delta, options, &mesh.boundary_mask()).iterations;

    double step = 1.0;
    while (true) {
      for (std::size_t i = 0; i < u.size(); ++i) trial[i] = u[i] + step * delta[i];
      auto trial_residual = state_residual(space, stiffness, trial, f_load, cfg);
      const double trial_norm = norm2(trial_residual);
      if (trial_norm < (1.0 - 1e-4 * step) * r_norm || trial_norm <= target) {
        u.swap(trial);
        residual = std::move(trial_residual);
        r_norm = trial_norm;
        break;
      }
      step *= cfg.backtrack;
      if (step < cfg.min_step) {
        std::ostringstream msg;
        msg << "solve_penalized: line search failed at residual " << r_norm << " (target " << target << ")";
        local.residual_history.push_back(trial_norm);
        throw SolverError(msg.str(), local.residual_history);
      }
    }
    ++local.iterations;
    local.residual_history.push_back(r_norm);
  }
  if (report) *report = std::move(local);
  return u;
}

ScalarField solve_penalized(const FeSpace& space, const MatrixControlField& q, std::span<const double> f_load,
                            const PenaltyConfig& cfg, const ScalarField* initial, NewtonReport* report) {
  return solve_penalized(space, assemble_stiffness(space, q), f_load, cfg, initial, report);
}

ScalarField solve_adjoint(const FeSpace& space, const CsrMatrix& stiffness, std::span<const double> u,
                          std::span<const double> u_d, const PenaltyConfig& cfg) {
  if (u.size() != space.size() || u_d.size() != space.size()) throw DimensionError("solve_adjoint: size mismatch");
  std::vector<double> diff(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) diff[i] = u[i] - u_d[i];
  auto rhs = space.mass().multiply(diff);
  zero_boundary(space.mesh(), rhs);

  CsrMatrix op = stiffness;
  if (cfg.gamma != 0.0) op.add_scaled(assemble_penalty_jacobian(space, u, cfg), 1.0);
  ScalarField p(space.size(), 0.0);
  CgOptions options;
  options.tol = cfg.linear_tol;
  solve_spd(op, rhs, p, options, &space.mesh().boundary_mask());
  return p;
}

ScalarField solve_adjoint(const FeSpace& space, const MatrixControlField& q, std::span<const double> u,
                          std::span<const double> u_d, const PenaltyConfig& cfg) {
  return solve_adjoint(space, assemble_stiffness(space, q), u, u_d, cfg);
}

ScalarField penalty_residual_as_multiplier(const FeSpace& space, std::span<const double> u, const PenaltyConfig& cfg) {
  auto n = assemble_penalty(space, u, cfg);
  for (std::size_t i = 0; i < n.size(); ++i) n[i] /= space.lumped_mass()[i];
  return n;
}

double max_violation(std::span<const double> u, double psi) {
  double v = 0.0;
  for (double x : u) v = std::max(v, x - psi);
  return v;
}

}  // namespace vicontrol
