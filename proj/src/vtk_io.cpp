// SPDX-License-Identifier: Apache-2.0

#include "vicontrol/vtk_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "vicontrol/errors.hpp"

namespace vicontrol {

const std::vector<double>* VtkGrid::find(const std::string& name) const {
  for (const auto& [key, values] : scalars) {
    if (key == name) return &values;
  }
  return nullptr;
}

VtkGrid make_grid(const StructuredMesh& mesh) {
  VtkGrid g;
  g.nx = mesh.nodes_per_side();
  g.ny = mesh.nodes_per_side();
  g.points.reserve(mesh.num_nodes());
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i) g.points.push_back(mesh.node(i));
  return g;
}

namespace {

void append_number(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

}  // namespace

std::string format_vtk(const VtkGrid& grid, const std::string& title) {
  const std::size_t n = static_cast<std::size_t>(grid.nx) * static_cast<std::size_t>(grid.ny);
  if (grid.points.size() != n) throw DimensionError("format_vtk: point count does not match the grid");
  std::string out;
  out += "# vtk DataFile Version 3.0\n";
  out += title + "\n";
  out += "ASCII\nDATASET STRUCTURED_GRID\n";
  out += "DIMENSIONS " + std::to_string(grid.nx) + " " + std::to_string(grid.ny) + " 1\n";
  out += "POINTS " + std::to_string(n) + " double\n";
  for (const auto& p : grid.points) {
    append_number(out, p.x);
    out += ' ';
    append_number(out, p.y);
    out += " 0\n";
  }
  out += "POINT_DATA " + std::to_string(n) + "\n";
  for (const auto& [name, values] : grid.scalars) {
    if (values.size() != n) throw DimensionError("format_vtk: field '" + name + "' has the wrong length");
    if (name.empty() || name.find_first_of(" \t\n") != std::string::npos) {
      throw DimensionError("format_vtk: invalid field name '" + name + "'");
    }
    out += "SCALARS " + name + " double 1\nLOOKUP_TABLE default\n";
    for (double v : values) {
      append_number(out, v);
      out += '\n';
    }
  }
  return out;
}

VtkGrid parse_vtk(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  const auto fail = [](const std::string& what) { throw Error("parse_vtk: " + what); };
  if (!std::getline(in, line) || line.rfind("# vtk DataFile", 0) != 0) fail("missing header");
  std::getline(in, line);  // title
  std::string word;
  in >> word;
  if (word != "ASCII") fail("only ASCII files are supported");
  in >> word >> line;
  if (word != "DATASET" || line != "STRUCTURED_GRID") fail("expected DATASET STRUCTURED_GRID");

  VtkGrid g;
  int nz = 0;
  in >> word >> g.nx >> g.ny >> nz;
  if (word != "DIMENSIONS" || g.nx <= 0 || g.ny <= 0 || nz != 1) fail("bad DIMENSIONS");
  const std::size_t n = static_cast<std::size_t>(g.nx) * static_cast<std::size_t>(g.ny);
  std::size_t count = 0;
  in >> word >> count >> line;
  if (word != "POINTS" || count != n) fail("bad POINTS");
  g.points.resize(n);
  for (auto& p : g.points) {
    double z = 0.0;
    if (!(in >> p.x >> p.y >> z)) fail("truncated POINTS");
  }
  in >> word >> count;
  if (word != "POINT_DATA" || count != n) fail("bad POINT_DATA");
  while (in >> word) {
    if (word != "SCALARS") fail("unexpected token '" + word + "'");
    std::string name, type, table;
    int components = 1;
    in >> name >> type >> components >> word >> table;
    if (components != 1 || word != "LOOKUP_TABLE") fail("bad SCALARS block for '" + name + "'");
    std::vector<double> values(n);
    for (auto& v : values) {
      if (!(in >> v)) fail("truncated field '" + name + "'");
    }
    g.scalars.emplace_back(std::move(name), std::move(values));
  }
  return g;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error("write to " + tmp.string() + " failed");
  }
  std::filesystem::rename(tmp, path);
}

void write_vtk(const std::filesystem::path& path, const VtkGrid& grid) { write_file_atomic(path, format_vtk(grid)); }

VtkGrid read_vtk(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_vtk(buf.str());
}

}  // namespace vicontrol
