// SPDX-License-Identifier: Apache-2.0

#include "vicontrol/mesh.hpp"

#include <string>

#include "vicontrol/errors.hpp"

namespace vicontrol {

StructuredMesh::StructuredMesh(int level) : level_(level) {
  if (level < 0) {
    throw CapacityError("mesh level must be nonnegative, got " + std::to_string(level));
  }
  if (level > kMaxLevel) {
    throw CapacityError("mesh level " + std::to_string(level) + " exceeds the guard " +
                        std::to_string(kMaxLevel));
  }
  cells_per_side_ = 1 << level;
  h_ = 2.0 / static_cast<double>(cells_per_side_);

  const int n = nodes_per_side();
  boundary_.assign(num_nodes(), 0);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const bool b = i == 0 || j == 0 || i == n - 1 || j == n - 1;
      boundary_[node_index(i, j)] = b ? 1 : 0;
      if (!b) ++num_interior_;
    }
  }
}

Point2 StructuredMesh::node(std::size_t n) const noexcept {
  const auto per_side = static_cast<std::size_t>(nodes_per_side());
  const auto i = static_cast<int>(n % per_side);
  const auto j = static_cast<int>(n / per_side);
  // Exact at the boundary: -1 + cells_per_side * h == 1.
  return {i == cells_per_side_ ? 1.0 : -1.0 + i * h_, j == cells_per_side_ ? 1.0 : -1.0 + j * h_};
}

std::array<std::size_t, 4> StructuredMesh::cell_nodes(std::size_t c) const noexcept {
  const auto per_side = static_cast<std::size_t>(cells_per_side_);
  const auto i = static_cast<int>(c % per_side);
  const auto j = static_cast<int>(c / per_side);
  return {node_index(i, j), node_index(i + 1, j), node_index(i + 1, j + 1), node_index(i, j + 1)};
}

Point2 StructuredMesh::cell_origin(std::size_t c) const noexcept {
  const auto per_side = static_cast<std::size_t>(cells_per_side_);
  const auto i = static_cast<int>(c % per_side);
  const auto j = static_cast<int>(c / per_side);
  return {-1.0 + i * h_, -1.0 + j * h_};
}

StructuredMesh build_mesh(int level) { return StructuredMesh(level); }

}  // namespace vicontrol
