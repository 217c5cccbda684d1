// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <limits>

#include "vicontrol/fem.hpp"
#include "vicontrol/matrix_field.hpp"

namespace vicontrol {

struct SpectralBounds {
  double q_min = 0.5;
  double q_max = 10.0;
};

/// Smallest of det/trace of (q - q_min I) and (q_max I - q) over all nodes.
struct AdmissibilityReport {
  bool admissible = true;
  std::size_t worst_node = 0;
  double min_det_lower = std::numeric_limits<double>::infinity();
  double min_det_upper = std::numeric_limits<double>::infinity();
  double min_trace_lower = std::numeric_limits<double>::infinity();
  double min_trace_upper = std::numeric_limits<double>::infinity();
  std::size_t violations = 0;  // nodes failing at least one test
};

/// Strict membership test: both shifted matrices positive definite at every
/// node, decided via determinant > 0 and trace > 0. Bilinear interpolation is
/// a convex combination, so nodal admissibility implies it everywhere.
[[nodiscard]] AdmissibilityReport check_admissible(const MatrixControlField& q, SpectralBounds bounds);

struct BarrierEval {
  bool feasible = false;
  double value = std::numeric_limits<double>::infinity();
  /// Partial derivatives of `value` with respect to each nodal component.
  MatrixControlField derivative;
};

/// B(q) = -int log det(q - q_min I) + log det(q_max I - q) dx, 2x2 Gauss.
/// Infeasible controls return feasible = false and value = +inf.
[[nodiscard]] BarrierEval barrier(const FeSpace& space, const MatrixControlField& q, SpectralBounds bounds);

/// Per-node eigenvalue clamp into [q_min + margin, q_max - margin].
[[nodiscard]] MatrixControlField project_spectral(const MatrixControlField& q, SpectralBounds bounds, double margin);
[[nodiscard]] Sym2 project_spectral(Sym2 m, double lo, double hi);

/// L2 Frobenius inner product; the off-diagonal component counts twice.
[[nodiscard]] double control_inner(const FeSpace& space, const MatrixControlField& a, const MatrixControlField& b);
[[nodiscard]] double control_norm(const FeSpace& space, const MatrixControlField& a);

/// Field G with control_inner(G, d) == dual.pair(d) for every direction d.
[[nodiscard]] MatrixControlField riesz(const FeSpace& space, const MatrixControlField& dual);

/// Dual vector of control_inner(a, .).
[[nodiscard]] MatrixControlField mass_apply(const FeSpace& space, const MatrixControlField& a);

/// Frobenius weight of component c (1, 1, 2).
[[nodiscard]] constexpr double frobenius_weight(std::size_t c) noexcept { return c == 2 ? 2.0 : 1.0; }

}  // namespace vicontrol
