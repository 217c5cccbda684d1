// SPDX-License-Identifier: Apache-2.0

#include "vicontrol/obstacle_vi.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "vicontrol/errors.hpp"
#include "vicontrol/linear_solver.hpp"

namespace vicontrol {

namespace {

std::string describe_sets(const std::vector<char>& a, const std::vector<char>& b) {
  std::size_t na = 0, nb = 0, diff = 0;
  std::ostringstream nodes;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += a[i] ? 1 : 0;
    nb += b[i] ? 1 : 0;
    if (a[i] != b[i]) {
      if (diff < 16) nodes << ' ' << i;
      ++diff;
    }
  }
  std::ostringstream out;
  out << "last active sets have " << na << " and " << nb << " nodes, differing at " << diff << " nodes:" << nodes.str();
  return out.str();
}

}  // namespace

PdasResult solve_pdas(const BoundConstrainedQp& qp, const PdasConfig& cfg, const std::vector<char>* initial_active) {
  if (!qp.k) throw DimensionError("solve_pdas: missing operator");
  const std::size_t n = qp.k->rows();
  if (qp.rhs.size() != n || qp.lumped.size() != n || qp.upper.size() != n) {
    throw DimensionError("solve_pdas: size mismatch");
  }
  if (!(cfg.c > 0.0)) throw SolverError("solve_pdas: the constant c must be positive");
  const auto is_fixed = [&](std::size_t i) { return qp.fixed && (*qp.fixed)[i]; };
  const auto is_bounded = [&](std::size_t i) { return qp.bounded && (*qp.bounded)[i] && !is_fixed(i); };

  PdasResult r;
  r.x.assign(n, 0.0);
  r.lambda.assign(n, 0.0);
  r.active.assign(n, 0);
  if (initial_active) {
    for (std::size_t i = 0; i < n; ++i) r.active[i] = ((*initial_active)[i] && is_bounded(i)) ? 1 : 0;
  }

  std::vector<char> eliminated(n, 0);
  std::vector<char> previous;
  std::vector<double> kx(n);
  CgOptions options;
  options.tol = cfg.linear_tol;

  for (int it = 1; it <= cfg.max_iters; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      eliminated[i] = (is_fixed(i) || r.active[i]) ? 1 : 0;
      if (is_fixed(i)) r.x[i] = 0.0;
      if (r.active[i]) r.x[i] = qp.upper[i];
    }
    solve_spd(*qp.k, qp.rhs, r.x, options, &eliminated);

    qp.k->multiply(r.x, kx);
    bool feasible = true;
    std::vector<char> next(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      r.lambda[i] = r.active[i] ? (qp.rhs[i] - kx[i]) / qp.lumped[i] : 0.0;
      if (!is_bounded(i)) continue;
      if (r.active[i] ? r.lambda[i] < -cfg.tol_feas : r.x[i] - qp.upper[i] > cfg.tol_feas) feasible = false;
      next[i] = (r.lambda[i] + cfg.c * (r.x[i] - qp.upper[i]) > 0.0) ? 1 : 0;
    }
    r.iterations = it;
    // A stable set certifies complementarity exactly; a feasible iterate whose
    // set would only flip within tolerance (degenerate nodes) is accepted too.
    if (next == r.active || feasible) return r;
    previous = r.active;
    r.active = std::move(next);
  }
  throw SolverError("solve_pdas: active set did not settle after " + std::to_string(cfg.max_iters) +
                    " iterations; " + describe_sets(previous, r.active));
}

double load_density_norm(const FeSpace& space, std::span<const double> f_load) {
  if (f_load.size() != space.size()) throw DimensionError("load_density_norm: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < f_load.size(); ++i) s += f_load[i] * f_load[i] / space.lumped_mass()[i];
  return std::sqrt(s);
}

VISolution solve_vi(const FeSpace& space, const CsrMatrix& stiffness, std::span<const double> f_load, double psi,
                    const PdasConfig& cfg, const std::vector<char>* initial_active) {
  if (f_load.size() != space.size()) throw DimensionError("solve_vi: load size does not match the mesh");
  const auto& mesh = space.mesh();
  std::vector<char> interior(space.size());
  for (std::size_t i = 0; i < interior.size(); ++i) interior[i] = mesh.is_boundary(i) ? 0 : 1;
  const std::vector<double> upper(space.size(), psi);

  BoundConstrainedQp qp;
  qp.k = &stiffness;
  qp.rhs = f_load;
  qp.lumped = space.lumped_mass();
  qp.upper = upper;
  qp.fixed = &mesh.boundary_mask();
  qp.bounded = &interior;
  auto r = solve_pdas(qp, cfg, initial_active);

  VISolution sol;
  sol.u = std::move(r.x);
  sol.lambda = std::move(r.lambda);
  sol.active = std::move(r.active);
  sol.iterations = r.iterations;
  sol.f_norm = load_density_norm(space, f_load);
  sol.strongly_active.assign(space.size(), 0);
  const double threshold = cfg.active_tol * sol.f_norm;
  for (std::size_t i = 0; i < space.size(); ++i) {
    sol.strongly_active[i] = (sol.active[i] && sol.lambda[i] > threshold) ? 1 : 0;
  }
  return sol;
}

VISolution solve_vi(const FeSpace& space, const MatrixControlField& q, std::span<const double> f_load, double psi,
                    const PdasConfig& cfg, const std::vector<char>* initial_active) {
  return solve_vi(space, assemble_stiffness(space, q), f_load, psi, cfg, initial_active);
}

ComplementarityResiduals complementarity_residuals(const FeSpace& space, const VISolution& sol, double psi) {
  if (sol.u.size() != space.size() || sol.lambda.size() != space.size()) {
    throw DimensionError("complementarity_residuals: size mismatch");
  }
  ComplementarityResiduals r;
  double comp = 0.0;
  for (std::size_t i = 0; i < space.size(); ++i) {
    r.feas_u = std::max(r.feas_u, sol.u[i] - psi);
    r.feas_lambda = std::max(r.feas_lambda, -sol.lambda[i]);
    comp += sol.lambda[i] * space.lumped_mass()[i] * (sol.u[i] - psi);
  }
  r.comp = std::abs(comp);
  return r;
}

double multiplier_bound_ratio(const FeSpace& space, const VISolution& sol, std::span<const double> f_load) {
  double s = 0.0;
  for (std::size_t i = 0; i < space.size(); ++i) s += space.lumped_mass()[i] * sol.lambda[i] * sol.lambda[i];
  const double f = load_density_norm(space, f_load);
  return f > 0.0 ? std::sqrt(s) / f : 0.0;
}

double gradient_bound_ratio(const FeSpace& space, const VISolution& sol, std::span<const double> f_load, double q_min,
                            double q_max) {
  const double f = load_density_norm(space, f_load);
  return f > 0.0 ? h1_seminorm(space, sol.u) * q_min / (q_max * f) : 0.0;
}

DenseMatrix dense_interior_block(const StructuredMesh& mesh, const CsrMatrix& a) {
  std::vector<std::size_t> map;
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
    if (!mesh.is_boundary(i)) map.push_back(i);
  }
  DenseMatrix d;
  d.n = map.size();
  d.data.assign(d.n * d.n, 0.0);
  for (std::size_t r = 0; r < d.n; ++r) {
    for (std::size_t c = 0; c < d.n; ++c) d.data[r * d.n + c] = a(map[r], map[c]);
  }
  return d;
}

std::vector<double> interior_values(const StructuredMesh& mesh, std::span<const double> v) {
  std::vector<double> out;
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
    if (!mesh.is_boundary(i)) out.push_back(v[i]);
  }
  return out;
}

EnumerationResult oracle_active_set_enumeration(const DenseMatrix& k, std::span<const double> f, double psi,
                                                std::span<const double> lumped) {
  const std::size_t n = k.n;
  if (n > 20) throw CapacityError("oracle_active_set_enumeration: at most 20 unknowns");
  if (f.size() != n || lumped.size() != n) throw DimensionError("oracle_active_set_enumeration: size mismatch");

  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> kd(
      k.data.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const Eigen::Map<const Eigen::VectorXd> fv(f.data(), static_cast<Eigen::Index>(n));

  EnumerationResult best;
  double best_violation = std::numeric_limits<double>::infinity();
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    std::vector<Eigen::Index> free_idx, act_idx;
    for (std::size_t i = 0; i < n; ++i) {
      ((mask >> i) & 1u ? act_idx : free_idx).push_back(static_cast<Eigen::Index>(i));
    }
    Eigen::VectorXd u = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), psi);
    if (!free_idx.empty()) {
      const auto nf = static_cast<Eigen::Index>(free_idx.size());
      Eigen::MatrixXd kff(nf, nf);
      Eigen::VectorXd rhs(nf);
      for (Eigen::Index r = 0; r < nf; ++r) {
        rhs(r) = fv(free_idx[static_cast<std::size_t>(r)]);
        for (Eigen::Index c = 0; c < nf; ++c) kff(r, c) = kd(free_idx[static_cast<std::size_t>(r)], free_idx[static_cast<std::size_t>(c)]);
        for (auto a : act_idx) rhs(r) -= kd(free_idx[static_cast<std::size_t>(r)], a) * psi;
      }
      const Eigen::VectorXd uf = kff.ldlt().solve(rhs);
      for (Eigen::Index r = 0; r < nf; ++r) u(free_idx[static_cast<std::size_t>(r)]) = uf(r);
    }
    const Eigen::VectorXd res = fv - kd * u;
    double violation = 0.0;
    for (auto i : free_idx) violation = std::max(violation, u(i) - psi);
    for (auto i : act_idx) violation = std::max(violation, -res(i) / lumped[static_cast<std::size_t>(i)]);
    if (violation < best_violation) {
      best_violation = violation;
      best.u.assign(u.data(), u.data() + n);
      best.lambda.assign(n, 0.0);
      best.active.assign(n, 0);
      for (auto i : act_idx) {
        best.lambda[static_cast<std::size_t>(i)] = res(i) / lumped[static_cast<std::size_t>(i)];
        best.active[static_cast<std::size_t>(i)] = 1;
      }
    }
  }
  if (best_violation > 1e-8 * (1.0 + std::abs(psi))) {
    throw SolverError("oracle_active_set_enumeration: no complementary configuration found");
  }
  return best;
}

}  // namespace vicontrol
