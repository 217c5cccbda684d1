// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "vicontrol/matrix_field.hpp"
#include "vicontrol/mesh.hpp"
#include "vicontrol/sparse.hpp"

namespace vicontrol {

/// Bilinear element on the unit reference square with a 2x2 Gauss rule.
/// Local node order follows StructuredMesh::cell_nodes.
struct Q1Rule {
  static constexpr int kNodes = 4;
  static constexpr int kPoints = 4;

  std::array<std::array<double, 2>, kPoints> points{};           // reference coordinates
  std::array<std::array<double, kNodes>, kPoints> phi{};         // phi[qp][a]
  std::array<std::array<double, kNodes>, kPoints> dphi_dxi{};    // d/dxi
  std::array<std::array<double, kNodes>, kPoints> dphi_deta{};   // d/deta
  double weight = 0.25;                                          // per point, reference area 1

  static const Q1Rule& get();
};

/// Mesh plus the operators every other module needs repeatedly: the mass
/// matrix, its row-sum lumping, the q = I stiffness and the CSR position of
/// every local element entry.
class FeSpace {
 public:
  explicit FeSpace(int level);

  [[nodiscard]] const StructuredMesh& mesh() const noexcept { return mesh_; }
  [[nodiscard]] std::size_t size() const noexcept { return mesh_.num_nodes(); }
  [[nodiscard]] double h() const noexcept { return mesh_.h(); }

  [[nodiscard]] const CsrMatrix& mass() const noexcept { return mass_; }
  [[nodiscard]] const std::vector<double>& lumped_mass() const noexcept { return lumped_; }
  [[nodiscard]] const CsrMatrix& laplace() const noexcept { return laplace_; }
  /// Operator with the 9-point pattern and zero values.
  [[nodiscard]] CsrMatrix zero_operator() const { return CsrMatrix(offsets_, cols_, std::vector<double>(cols_.size(), 0.0)); }
  /// positions[a * 4 + b] = CSR slot of (node a, node b) of cell c.
  [[nodiscard]] const std::array<std::uint32_t, 16>& cell_positions(std::size_t c) const noexcept {
    return cell_positions_[c];
  }
  /// Physical coordinates of quadrature point `qp` of cell `c`.
  [[nodiscard]] Point2 quadrature_point(std::size_t c, int qp) const noexcept;

 private:
  StructuredMesh mesh_;
  std::vector<std::size_t> offsets_;
  std::vector<std::uint32_t> cols_;
  std::vector<std::array<std::uint32_t, 16>> cell_positions_;
  CsrMatrix mass_;
  std::vector<double> lumped_;
  CsrMatrix laplace_;
};

/// (q grad phi_j, grad phi_i) with q interpolated at the Gauss points.
/// Throws CoefficientError naming the first cell where q is not positive definite.
[[nodiscard]] CsrMatrix assemble_stiffness(const FeSpace& space, const MatrixControlField& q);

/// Same bilinear form without the definiteness check, for perturbation directions.
[[nodiscard]] CsrMatrix assemble_coefficient_form(const FeSpace& space, const MatrixControlField& d);

[[nodiscard]] CsrMatrix assemble_mass(const FeSpace& space);

/// (w phi_j, phi_i) with a weight given per quadrature point: weights[4 * cell + qp].
[[nodiscard]] CsrMatrix assemble_weighted_mass(const FeSpace& space, std::span<const double> weights);

/// Row sums of the consistent mass matrix.
[[nodiscard]] std::vector<double> lumped_mass(const CsrMatrix& mass);

/// (f, phi_i) with f evaluated at the Gauss points.
[[nodiscard]] ScalarField assemble_load(const FeSpace& space, const std::function<double(double, double)>& f);

/// Nodal interpolant of a pointwise function.
[[nodiscard]] ScalarField interpolate(const StructuredMesh& mesh, const std::function<double(double, double)>& f);

/// sqrt(v^T M v)
[[nodiscard]] double l2_norm(const FeSpace& space, std::span<const double> v);
[[nodiscard]] double l2_inner(const FeSpace& space, std::span<const double> a, std::span<const double> b);
/// sqrt(v^T K_I v)
[[nodiscard]] double h1_seminorm(const FeSpace& space, std::span<const double> v);

/// ||v_h - exact||_L2 with a 3x3 Gauss rule per cell.
[[nodiscard]] double l2_error(const FeSpace& space, std::span<const double> v,
                              const std::function<double(double, double)>& exact);

/// Nodal values on `fine` of the bilinear interpolant of `v` on the nested coarser mesh `coarse`.
[[nodiscard]] ScalarField prolongate(const StructuredMesh& coarse, std::span<const double> v, const StructuredMesh& fine);

/// Values and physical gradients of a nodal field at the four Gauss points of a cell.
struct CellSample {
  std::array<double, Q1Rule::kPoints> value{};
  std::array<double, Q1Rule::kPoints> dx{};
  std::array<double, Q1Rule::kPoints> dy{};
};
[[nodiscard]] CellSample sample_cell(const FeSpace& space, std::size_t cell, std::span<const double> field);

/// Zero the boundary entries of a nodal vector.
void zero_boundary(const StructuredMesh& mesh, std::span<double> v);

}  // namespace vicontrol
