// SPDX-License-Identifier: Apache-2.0

#include "vicontrol/fem.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vicontrol/errors.hpp"

namespace vicontrol {

const Q1Rule& Q1Rule::get() {
  static const Q1Rule rule = [] {
    Q1Rule r;
    const double g = 0.5 / std::sqrt(3.0);
    const std::array<double, 2> gauss = {0.5 - g, 0.5 + g};
    int qp = 0;
    for (int j = 0; j < 2; ++j) {
      for (int i = 0; i < 2; ++i) {
        const double xi = gauss[static_cast<std::size_t>(i)];
        const double eta = gauss[static_cast<std::size_t>(j)];
        auto& p = r.points[static_cast<std::size_t>(qp)];
        p = {xi, eta};
        auto& phi = r.phi[static_cast<std::size_t>(qp)];
        auto& dxi = r.dphi_dxi[static_cast<std::size_t>(qp)];
        auto& deta = r.dphi_deta[static_cast<std::size_t>(qp)];
        phi = {(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta};
        dxi = {-(1 - eta), (1 - eta), eta, -eta};
        deta = {-(1 - xi), -xi, xi, (1 - xi)};
        ++qp;
      }
    }
    return r;
  }();
  return rule;
}

FeSpace::FeSpace(int level) : mesh_(level) {
  const int n = mesh_.nodes_per_side();
  offsets_.reserve(mesh_.num_nodes() + 1);
  offsets_.push_back(0);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      for (int dj = -1; dj <= 1; ++dj) {
        for (int di = -1; di <= 1; ++di) {
          const int ii = i + di;
          const int jj = j + dj;
          if (ii < 0 || jj < 0 || ii >= n || jj >= n) continue;
          cols_.push_back(static_cast<std::uint32_t>(mesh_.node_index(ii, jj)));
        }
      }
      offsets_.push_back(cols_.size());
    }
  }

  const CsrMatrix pattern = zero_operator();
  cell_positions_.resize(mesh_.num_cells());
  for (std::size_t c = 0; c < mesh_.num_cells(); ++c) {
    const auto nodes = mesh_.cell_nodes(c);
    for (int a = 0; a < 4; ++a) {
      for (int b = 0; b < 4; ++b) {
        cell_positions_[c][static_cast<std::size_t>(a * 4 + b)] =
            static_cast<std::uint32_t>(pattern.find(nodes[static_cast<std::size_t>(a)], nodes[static_cast<std::size_t>(b)]));
      }
    }
  }

  mass_ = assemble_mass(*this);
  lumped_ = vicontrol::lumped_mass(mass_);
  laplace_ = assemble_coefficient_form(*this, MatrixControlField(size(), Sym2{1.0, 1.0, 0.0}));
}

Point2 FeSpace::quadrature_point(std::size_t c, int qp) const noexcept {
  const auto origin = mesh_.cell_origin(c);
  const auto& p = Q1Rule::get().points[static_cast<std::size_t>(qp)];
  return {origin.x + p[0] * mesh_.h(), origin.y + p[1] * mesh_.h()};
}

namespace {

CsrMatrix assemble_form(const FeSpace& space, const MatrixControlField& q, bool check) {
  if (q.size() != space.size()) throw DimensionError("coefficient field size does not match the mesh");
  const auto& rule = Q1Rule::get();
  CsrMatrix k = space.zero_operator();
  auto& values = k.values();
  const auto& mesh = space.mesh();

  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const auto nodes = mesh.cell_nodes(c);
    const auto& pos = space.cell_positions(c);
    for (int qp = 0; qp < Q1Rule::kPoints; ++qp) {
      const auto sq = static_cast<std::size_t>(qp);
      Sym2 m{};
      for (std::size_t a = 0; a < 4; ++a) m = m + rule.phi[sq][a] * q.at(nodes[a]);
      if (check && !(m.det() > 0.0 && m.trace() > 0.0)) {
        throw CoefficientError("coefficient is not positive definite in cell " + std::to_string(c));
      }
      // The 1/h^2 from the gradients cancels the h^2 of the cell area.
      for (std::size_t a = 0; a < 4; ++a) {
        const double ax = rule.dphi_dxi[sq][a];
        const double ay = rule.dphi_deta[sq][a];
        for (std::size_t b = 0; b < 4; ++b) {
          const double bx = rule.dphi_dxi[sq][b];
          const double by = rule.dphi_deta[sq][b];
          const double v = ax * (m.a11 * bx + m.a12 * by) + ay * (m.a12 * bx + m.a22 * by);
          values[pos[a * 4 + b]] += rule.weight * v;
        }
      }
    }
  }
  return k;
}

}  // namespace

CsrMatrix assemble_stiffness(const FeSpace& space, const MatrixControlField& q) { return assemble_form(space, q, true); }

CsrMatrix assemble_coefficient_form(const FeSpace& space, const MatrixControlField& d) {
  return assemble_form(space, d, false);
}

CsrMatrix assemble_weighted_mass(const FeSpace& space, std::span<const double> weights) {
  const auto& mesh = space.mesh();
  if (weights.size() != mesh.num_cells() * Q1Rule::kPoints) {
    throw DimensionError("assemble_weighted_mass: expected one weight per quadrature point");
  }
  const auto& rule = Q1Rule::get();
  const double area = mesh.h() * mesh.h() * rule.weight;
  CsrMatrix m = space.zero_operator();
  auto& values = m.values();
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const auto& pos = space.cell_positions(c);
    for (std::size_t qp = 0; qp < Q1Rule::kPoints; ++qp) {
      const double w = weights[c * Q1Rule::kPoints + qp];
      if (w == 0.0) continue;
      for (std::size_t a = 0; a < 4; ++a) {
        for (std::size_t b = 0; b < 4; ++b) {
          values[pos[a * 4 + b]] += area * w * rule.phi[qp][a] * rule.phi[qp][b];
        }
      }
    }
  }
  return m;
}

CsrMatrix assemble_mass(const FeSpace& space) {
  const std::vector<double> ones(space.mesh().num_cells() * Q1Rule::kPoints, 1.0);
  return assemble_weighted_mass(space, ones);
}

std::vector<double> lumped_mass(const CsrMatrix& mass) {
  std::vector<double> out(mass.rows(), 0.0);
  const auto& offsets = mass.row_offsets();
  const auto& values = mass.values();
  for (std::size_t i = 0; i < mass.rows(); ++i) {
    for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) out[i] += values[k];
  }
  return out;
}

ScalarField assemble_load(const FeSpace& space, const std::function<double(double, double)>& f) {
  const auto& mesh = space.mesh();
  const auto& rule = Q1Rule::get();
  const double area = mesh.h() * mesh.h() * rule.weight;
  ScalarField load(space.size(), 0.0);
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const auto nodes = mesh.cell_nodes(c);
    for (int qp = 0; qp < Q1Rule::kPoints; ++qp) {
      const auto x = space.quadrature_point(c, qp);
      const double fv = f(x.x, x.y);
      for (std::size_t a = 0; a < 4; ++a) load[nodes[a]] += area * fv * rule.phi[static_cast<std::size_t>(qp)][a];
    }
  }
  return load;
}

ScalarField interpolate(const StructuredMesh& mesh, const std::function<double(double, double)>& f) {
  ScalarField v(mesh.num_nodes());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto p = mesh.node(i);
    v[i] = f(p.x, p.y);
  }
  return v;
}

double l2_inner(const FeSpace& space, std::span<const double> a, std::span<const double> b) {
  if (a.size() != space.size() || b.size() != space.size()) throw DimensionError("l2_inner: size mismatch");
  return dot(a, space.mass().multiply(b));
}

double l2_norm(const FeSpace& space, std::span<const double> v) {
  if (v.size() != space.size()) throw DimensionError("l2_norm: size mismatch");
  return std::sqrt(std::max(0.0, space.mass().quadratic_form(v)));
}

double h1_seminorm(const FeSpace& space, std::span<const double> v) {
  if (v.size() != space.size()) throw DimensionError("h1_seminorm: size mismatch");
  return std::sqrt(std::max(0.0, space.laplace().quadratic_form(v)));
}

double l2_error(const FeSpace& space, std::span<const double> v, const std::function<double(double, double)>& exact) {
  if (v.size() != space.size()) throw DimensionError("l2_error: size mismatch");
  const auto& mesh = space.mesh();
  const double r = std::sqrt(0.6);
  const std::array<double, 3> pts = {0.5 * (1 - r), 0.5, 0.5 * (1 + r)};
  const std::array<double, 3> wts = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
  const double h = mesh.h();
  double s = 0.0;
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const auto nodes = mesh.cell_nodes(c);
    const auto o = mesh.cell_origin(c);
    for (std::size_t j = 0; j < 3; ++j) {
      for (std::size_t i = 0; i < 3; ++i) {
        const double xi = pts[i], eta = pts[j];
        const double vh = (1 - xi) * (1 - eta) * v[nodes[0]] + xi * (1 - eta) * v[nodes[1]] + xi * eta * v[nodes[2]] +
                          (1 - xi) * eta * v[nodes[3]];
        const double e = vh - exact(o.x + xi * h, o.y + eta * h);
        s += wts[i] * wts[j] * h * h * e * e;
      }
    }
  }
  return std::sqrt(s);
}

ScalarField prolongate(const StructuredMesh& coarse, std::span<const double> v, const StructuredMesh& fine) {
  if (v.size() != coarse.num_nodes()) throw DimensionError("prolongate: size mismatch");
  if (fine.level() < coarse.level()) throw DimensionError("prolongate: target mesh is coarser");
  const int ratio = 1 << (fine.level() - coarse.level());
  const int nc = coarse.cells_per_side();
  ScalarField out(fine.num_nodes());
  for (int j = 0; j < fine.nodes_per_side(); ++j) {
    for (int i = 0; i < fine.nodes_per_side(); ++i) {
      const int ci = std::min(i / ratio, nc - 1);
      const int cj = std::min(j / ratio, nc - 1);
      const double xi = static_cast<double>(i - ci * ratio) / ratio;
      const double eta = static_cast<double>(j - cj * ratio) / ratio;
      out[fine.node_index(i, j)] = (1 - xi) * (1 - eta) * v[coarse.node_index(ci, cj)] +
                                   xi * (1 - eta) * v[coarse.node_index(ci + 1, cj)] +
                                   xi * eta * v[coarse.node_index(ci + 1, cj + 1)] +
                                   (1 - xi) * eta * v[coarse.node_index(ci, cj + 1)];
    }
  }
  return out;
}

CellSample sample_cell(const FeSpace& space, std::size_t cell, std::span<const double> field) {
  const auto& rule = Q1Rule::get();
  const auto nodes = space.mesh().cell_nodes(cell);
  const double inv_h = 1.0 / space.h();
  CellSample s;
  for (std::size_t qp = 0; qp < Q1Rule::kPoints; ++qp) {
    double v = 0.0, dx = 0.0, dy = 0.0;
    for (std::size_t a = 0; a < 4; ++a) {
      const double u = field[nodes[a]];
      v += rule.phi[qp][a] * u;
      dx += rule.dphi_dxi[qp][a] * u;
      dy += rule.dphi_deta[qp][a] * u;
    }
    s.value[qp] = v;
    s.dx[qp] = dx * inv_h;
    s.dy[qp] = dy * inv_h;
  }
  return s;
}

void zero_boundary(const StructuredMesh& mesh, std::span<double> v) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (mesh.is_boundary(i)) v[i] = 0.0;
  }
}

}  // namespace vicontrol
