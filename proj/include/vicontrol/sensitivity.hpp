// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "vicontrol/control_field.hpp"
#include "vicontrol/fem.hpp"
#include "vicontrol/obstacle_vi.hpp"
#include "vicontrol/optimizer.hpp"

namespace vicontrol {

/// Nodal critical cone of the obstacle problem at a solution.
/// Nodes in none of the three sets (the Dirichlet boundary) are held at zero.
struct CriticalCone {
  std::vector<char> zero_nodes;         // multiplier support: phi_i = 0
  std::vector<char> nonpositive_nodes;  // biactive: phi_i <= 0
  std::vector<char> free_nodes;
  [[nodiscard]] std::size_t count_zero() const;
  [[nodiscard]] std::size_t count_nonpositive() const;
  [[nodiscard]] std::size_t count_free() const;
  [[nodiscard]] bool is_subspace() const { return count_nonpositive() == 0; }
};

/// zero_nodes: active with lambda > tol ||f||; nonpositive_nodes: the rest of
/// the active set, ties included.
[[nodiscard]] CriticalCone build_critical_cone(const StructuredMesh& mesh, const VISolution& sol, double tol = 1e-8);

struct ConeSolution {
  ScalarField u;       // minimizer of 1/2 u^T K u - rhs^T u over the cone
  ScalarField lambda;  // (rhs - K u)_i / m_i, the cone multiplier
  int iterations = 0;
};

/// Cone-constrained QP by PDAS on the sign-constrained nodes.
[[nodiscard]] ConeSolution solve_cone_vi(const CsrMatrix& k, std::span<const double> rhs, std::span<const double> lumped,
                                         const CriticalCone& cone, const PdasConfig& cfg = {});

/// S'(q; d) for the state u = S(q): the cone VI with right side -(d grad u, grad phi).
[[nodiscard]] ConeSolution directional_derivative(const FeSpace& space, const MatrixControlField& q,
                                                  const MatrixControlField& d, std::span<const double> u,
                                                  const CriticalCone& cone, const PdasConfig& cfg = {});

struct DerivativeResiduals {
  double cone_feasibility = 0.0;  // max |u~| on zero_nodes, max (u~)^+ on nonpositive_nodes
  double polarity = 0.0;          // max |lambda~| on free nodes, max (-lambda~)^+ on nonpositive_nodes
  double complementarity = 0.0;   // |sum_i m_i lambda~_i u~_i|
  [[nodiscard]] double max() const;
};

/// Residuals of the derivative complementarity system, with lambda~ recomputed
/// from the equation residual.
[[nodiscard]] DerivativeResiduals derivative_complementarity_check(const FeSpace& space, const MatrixControlField& q,
                                                                   const MatrixControlField& d,
                                                                   std::span<const double> u,
                                                                   std::span<const double> u_tilde,
                                                                   const CriticalCone& cone);

/// Same on an assembled operator and right-hand side.
[[nodiscard]] DerivativeResiduals cone_residuals(const CsrMatrix& k, std::span<const double> rhs,
                                                 std::span<const double> lumped, std::span<const double> u_tilde,
                                                 const CriticalCone& cone);

struct FirstOrderReport {
  std::vector<double> values;  // one directional value per candidate
  double min_value = 0.0;
  double scale = 0.0;          // sum of the magnitudes of the three terms, largest over candidates
};

/// (u - u_d, S'(q; c - q)) + alpha (q - q_d, c - q) + beta B'(q)(c - q) for each candidate c.
/// `sol` is the obstacle solution at q.
[[nodiscard]] FirstOrderReport primal_first_order_check(const FeSpace& space, const MatrixControlField& q,
                                                        const VISolution& sol,
                                                        std::span<const MatrixControlField> candidates,
                                                        const ObjectiveConfig& cfg, const PdasConfig& pdas = {});

}  // namespace vicontrol
