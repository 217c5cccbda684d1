// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "vicontrol/mesh.hpp"

namespace vicontrol {

/// Nodal scalars on a structured grid, in legacy ASCII VTK layout.
struct VtkGrid {
  int nx = 0;
  int ny = 0;
  std::vector<Point2> points;  // x fastest
  std::vector<std::pair<std::string, std::vector<double>>> scalars;

  [[nodiscard]] const std::vector<double>* find(const std::string& name) const;
};

[[nodiscard]] VtkGrid make_grid(const StructuredMesh& mesh);

/// STRUCTURED_GRID with POINT_DATA, values printed with 17 significant digits.
[[nodiscard]] std::string format_vtk(const VtkGrid& grid, const std::string& title = "vicontrol fields");
[[nodiscard]] VtkGrid parse_vtk(const std::string& text);

void write_vtk(const std::filesystem::path& path, const VtkGrid& grid);
[[nodiscard]] VtkGrid read_vtk(const std::filesystem::path& path);

/// Write to a temporary file next to `path`, then rename over it.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace vicontrol
