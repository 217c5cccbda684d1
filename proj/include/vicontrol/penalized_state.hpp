// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "vicontrol/fem.hpp"
#include "vicontrol/matrix_field.hpp"
#include "vicontrol/sparse.hpp"

namespace vicontrol {

/// Where max(u - psi, 0)^3 is evaluated when the penalty is integrated.
enum class PenaltyQuadrature {
  /// Nodal values weighted by the lumped mass; the gamma -> infinity limit is
  /// the nodal constraint u_i <= psi of the discrete obstacle problem.
  Lumped,
  /// Interpolated u at the 2x2 Gauss points.
  Gauss,
};

/// Cubic penalty r(gamma; u) = gamma * max(u - psi, 0)^3.
struct PenaltyConfig {
  double gamma = 0.0;
  double psi = 0.5;
  PenaltyQuadrature quadrature = PenaltyQuadrature::Lumped;
  double newton_tol = 1e-11;  // ||R(u)|| <= newton_tol * ||f_load||
  int newton_max = 200;
  double backtrack = 0.5;
  double min_step = 0x1p-20;
  double linear_tol = 1e-12;
};

struct NewtonReport {
  int iterations = 0;
  int linear_iterations = 0;
  std::vector<double> residual_history;
};

/// Penalty term (gamma max(u - psi, 0)^3, phi_i) under the configured quadrature.
[[nodiscard]] std::vector<double> assemble_penalty(const FeSpace& space, std::span<const double> u,
                                                   const PenaltyConfig& cfg);

/// (3 gamma max(u - psi, 0)^2 phi_j, phi_i), the derivative of assemble_penalty.
[[nodiscard]] CsrMatrix assemble_penalty_jacobian(const FeSpace& space, std::span<const double> u,
                                                  const PenaltyConfig& cfg);

/// Newton's method for K_q u + N_gamma(u) = f_load with homogeneous Dirichlet
/// data. `initial` (if given) is the starting point. Throws SolverError with
/// the residual history on divergence.
[[nodiscard]] ScalarField solve_penalized(const FeSpace& space, const CsrMatrix& stiffness,
                                          std::span<const double> f_load, const PenaltyConfig& cfg,
                                          const ScalarField* initial = nullptr, NewtonReport* report = nullptr);
[[nodiscard]] ScalarField solve_penalized(const FeSpace& space, const MatrixControlField& q,
                                          std::span<const double> f_load, const PenaltyConfig& cfg,
                                          const ScalarField* initial = nullptr, NewtonReport* report = nullptr);

/// (K_q + D_gamma(u)) p = M (u - u_d), the adjoint of the penalized state
/// equation written in symmetric form.
[[nodiscard]] ScalarField solve_adjoint(const FeSpace& space, const CsrMatrix& stiffness, std::span<const double> u,
                                        std::span<const double> u_d, const PenaltyConfig& cfg);
[[nodiscard]] ScalarField solve_adjoint(const FeSpace& space, const MatrixControlField& q, std::span<const double> u,
                                        std::span<const double> u_d, const PenaltyConfig& cfg);

/// Lumped nodal density of r(gamma; u), comparable to the obstacle multiplier.
[[nodiscard]] ScalarField penalty_residual_as_multiplier(const FeSpace& space, std::span<const double> u,
                                                         const PenaltyConfig& cfg);

/// Largest nodal violation max_i (u_i - psi), clipped at zero.
[[nodiscard]] double max_violation(std::span<const double> u, double psi);

}  // namespace vicontrol
