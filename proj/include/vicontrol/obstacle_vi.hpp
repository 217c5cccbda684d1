// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vicontrol/fem.hpp"
#include "vicontrol/matrix_field.hpp"
#include "vicontrol/sparse.hpp"

namespace vicontrol {

struct PdasConfig {
  double c = 1.0;            // constant of lambda - max(0, lambda + c (u - psi)) = 0
  int max_iters = 200;
  double tol_feas = 1e-10;   // accepted violation of u <= psi and lambda >= 0
  double tol_comp = 1e-10;
  double active_tol = 1e-8;  // strongly active: lambda > active_tol * ||f||
  double linear_tol = 1e-13;
};

/// Discrete obstacle problem solution with a lumped nodal multiplier:
/// K u + M_L lambda = f, u <= psi, lambda >= 0, lambda_i (u_i - psi) = 0.
struct VISolution {
  ScalarField u;
  ScalarField lambda;
  std::vector<char> active;           // u_i = psi imposed
  std::vector<char> strongly_active;  // lambda_i above threshold
  int iterations = 0;
  double f_norm = 0.0;                // L2 norm of the load density, sets the lambda scale
};

/// Box-type QP solved by the primal-dual active set method:
///   min 1/2 x^T K x - rhs^T x  s.t.  x_i = 0 on `fixed`, x_i <= upper_i on `bounded`.
/// The multiplier of a bound is reported as a density, (rhs - K x)_i / lumped_i.
struct BoundConstrainedQp {
  const CsrMatrix* k = nullptr;
  std::span<const double> rhs;
  std::span<const double> lumped;
  std::span<const double> upper;
  const std::vector<char>* fixed = nullptr;
  const std::vector<char>* bounded = nullptr;
};

struct PdasResult {
  std::vector<double> x;
  std::vector<double> lambda;
  std::vector<char> active;
  int iterations = 0;
};

/// Throws SolverError if the active set does not settle within max_iters.
[[nodiscard]] PdasResult solve_pdas(const BoundConstrainedQp& qp, const PdasConfig& cfg,
                                    const std::vector<char>* initial_active = nullptr);

/// Obstacle problem for a fixed coefficient q and constant obstacle psi > 0.
[[nodiscard]] VISolution solve_vi(const FeSpace& space, const MatrixControlField& q, std::span<const double> f_load,
                                  double psi, const PdasConfig& cfg = {},
                                  const std::vector<char>* initial_active = nullptr);

/// Same with an already assembled stiffness matrix.
[[nodiscard]] VISolution solve_vi(const FeSpace& space, const CsrMatrix& stiffness, std::span<const double> f_load,
                                  double psi, const PdasConfig& cfg = {},
                                  const std::vector<char>* initial_active = nullptr);

struct ComplementarityResiduals {
  double feas_u = 0.0;       // max(u - psi)^+
  double feas_lambda = 0.0;  // max(-lambda)^+
  double comp = 0.0;         // |sum_i lambda_i m_i (u_i - psi)|
};

[[nodiscard]] ComplementarityResiduals complementarity_residuals(const FeSpace& space, const VISolution& sol, double psi);

/// L2 norm of the lumped density f_i / m_i.
[[nodiscard]] double load_density_norm(const FeSpace& space, std::span<const double> f_load);

/// ||lambda||_L2 / ||f||_L2 with both norms taken under the lumped mass.
[[nodiscard]] double multiplier_bound_ratio(const FeSpace& space, const VISolution& sol, std::span<const double> f_load);

/// ||grad u||_L2 * q_min / (q_max ||f||_L2), a scale-free size of the state.
[[nodiscard]] double gradient_bound_ratio(const FeSpace& space, const VISolution& sol, std::span<const double> f_load,
                                          double q_min, double q_max);

/// Row-major dense matrix, used by the enumeration oracle.
struct DenseMatrix {
  std::size_t n = 0;
  std::vector<double> data;
  [[nodiscard]] double operator()(std::size_t i, std::size_t j) const { return data[i * n + j]; }
};

/// Interior-interior block of an assembled operator.
[[nodiscard]] DenseMatrix dense_interior_block(const StructuredMesh& mesh, const CsrMatrix& a);
[[nodiscard]] std::vector<double> interior_values(const StructuredMesh& mesh, std::span<const double> v);

struct EnumerationResult {
  std::vector<double> u;
  std::vector<double> lambda;  // (f - K u)_i / m_i
  std::vector<char> active;
};

/// Exhaustive search over all 2^n active sets of min 1/2 u^T K u - f^T u, u <= psi.
/// Intended as a test oracle, n <= 20.
[[nodiscard]] EnumerationResult oracle_active_set_enumeration(const DenseMatrix& k, std::span<const double> f,
                                                              double psi, std::span<const double> lumped);

}  // namespace vicontrol
