// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace vicontrol {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Uniform quadrilateral grid of (-1,1)^2 with 2^level cells per side.
///
/// Nodes are numbered lexicographically, `i + (2^level + 1) * j`, with node
/// (i, j) at (-1 + i h, -1 + j h). Cells are numbered the same way and list
/// their nodes counter-clockwise starting at the lower-left corner.
class StructuredMesh {
 public:
  static constexpr int kMaxLevel = 12;

  explicit StructuredMesh(int level);

  [[nodiscard]] int level() const noexcept { return level_; }
  [[nodiscard]] int cells_per_side() const noexcept { return cells_per_side_; }
  [[nodiscard]] int nodes_per_side() const noexcept { return cells_per_side_ + 1; }
  [[nodiscard]] double h() const noexcept { return h_; }

  [[nodiscard]] std::size_t num_nodes() const noexcept {
    return static_cast<std::size_t>(nodes_per_side()) * static_cast<std::size_t>(nodes_per_side());
  }
  [[nodiscard]] std::size_t num_cells() const noexcept {
    return static_cast<std::size_t>(cells_per_side_) * static_cast<std::size_t>(cells_per_side_);
  }
  [[nodiscard]] std::size_t num_interior() const noexcept { return num_interior_; }

  [[nodiscard]] std::size_t node_index(int i, int j) const noexcept {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(nodes_per_side()) * static_cast<std::size_t>(j);
  }
  [[nodiscard]] Point2 node(std::size_t n) const noexcept;
  [[nodiscard]] std::array<std::size_t, 4> cell_nodes(std::size_t c) const noexcept;
  /// Lower-left corner of cell `c`.
  [[nodiscard]] Point2 cell_origin(std::size_t c) const noexcept;

  [[nodiscard]] bool is_boundary(std::size_t n) const noexcept { return boundary_[n] != 0; }
  [[nodiscard]] const std::vector<char>& boundary_mask() const noexcept { return boundary_; }

 private:
  int level_;
  int cells_per_side_;
  double h_;
  std::size_t num_interior_ = 0;
  std::vector<char> boundary_;
};

/// Throws CapacityError for levels above StructuredMesh::kMaxLevel.
[[nodiscard]] StructuredMesh build_mesh(int level);

}  // namespace vicontrol
