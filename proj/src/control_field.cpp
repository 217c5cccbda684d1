// SPDX-License-Identifier: Apache-2.0

#include "vicontrol/control_field.hpp"

#include <algorithm>
#include <cmath>

#include "vicontrol/errors.hpp"
#include "vicontrol/linear_solver.hpp"

namespace vicontrol {

void MatrixControlField::axpy(double s, const MatrixControlField& other) {
  if (other.size() != size()) throw DimensionError("MatrixControlField::axpy: size mismatch");
  for (std::size_t c = 0; c < kComponents; ++c) {
    for (std::size_t i = 0; i < size(); ++i) comp[c][i] += s * other.comp[c][i];
  }
}

MatrixControlField MatrixControlField::operator-(const MatrixControlField& other) const {
  MatrixControlField out = *this;
  out.axpy(-1.0, other);
  return out;
}

MatrixControlField MatrixControlField::operator+(const MatrixControlField& other) const {
  MatrixControlField out = *this;
  out.axpy(1.0, other);
  return out;
}

MatrixControlField MatrixControlField::scaled(double s) const {
  MatrixControlField out = *this;
  for (auto& c : out.comp) {
    for (auto& v : c) v *= s;
  }
  return out;
}

double MatrixControlField::pair(const MatrixControlField& direction) const {
  if (direction.size() != size()) throw DimensionError("MatrixControlField::pair: size mismatch");
  double s = 0.0;
  for (std::size_t c = 0; c < kComponents; ++c) s += dot(comp[c], direction.comp[c]);
  return s;
}

AdmissibilityReport check_admissible(const MatrixControlField& q, SpectralBounds bounds) {
  AdmissibilityReport r;
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < q.size(); ++i) {
    const Sym2 m = q.at(i);
    const Sym2 lower = m.shifted(-bounds.q_min);
    const Sym2 upper = (-m).shifted(bounds.q_max);
    const double dl = lower.det(), du = upper.det(), tl = lower.trace(), tu = upper.trace();
    r.min_det_lower = std::min(r.min_det_lower, dl);
    r.min_det_upper = std::min(r.min_det_upper, du);
    r.min_trace_lower = std::min(r.min_trace_lower, tl);
    r.min_trace_upper = std::min(r.min_trace_upper, tu);
    const double node_worst = std::min({dl, du, tl, tu});
    if (node_worst < worst) {
      worst = node_worst;
      r.worst_node = i;
    }
    if (!(dl > 0.0 && du > 0.0 && tl > 0.0 && tu > 0.0)) ++r.violations;
  }
  r.admissible = r.violations == 0;
  return r;
}

BarrierEval barrier(const FeSpace& space, const MatrixControlField& q, SpectralBounds bounds) {
  if (q.size() != space.size()) throw DimensionError("barrier: control size does not match the mesh");
  BarrierEval out;
  if (!check_admissible(q, bounds).admissible) return out;

  const auto& mesh = space.mesh();
  const auto& rule = Q1Rule::get();
  const double area = mesh.h() * mesh.h() * rule.weight;
  out.derivative = MatrixControlField(q.size());
  double value = 0.0;
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const auto nodes = mesh.cell_nodes(c);
    for (std::size_t qp = 0; qp < Q1Rule::kPoints; ++qp) {
      Sym2 m{};
      for (std::size_t a = 0; a < 4; ++a) m = m + rule.phi[qp][a] * q.at(nodes[a]);
      const Sym2 lower = m.shifted(-bounds.q_min);
      const Sym2 upper = (-m).shifted(bounds.q_max);
      value -= area * (std::log(lower.det()) + std::log(upper.det()));
      // d/dq of -log det(q - q_min I) - log det(q_max I - q) = -(lower^-1 - upper^-1)
      const Sym2 density = -(lower.inverse() - upper.inverse());
      for (std::size_t a = 0; a < 4; ++a) {
        const double w = area * rule.phi[qp][a];
        out.derivative.comp[0][nodes[a]] += w * density.a11;
        out.derivative.comp[1][nodes[a]] += w * density.a22;
        out.derivative.comp[2][nodes[a]] += 2.0 * w * density.a12;
      }
    }
  }
  out.value = value;
  out.feasible = true;
  return out;
}

Sym2 project_spectral(Sym2 m, double lo, double hi) {
  const double mean = 0.5 * (m.a11 + m.a22);
  const double half_diff = 0.5 * (m.a11 - m.a22);
  const double radius = std::hypot(half_diff, m.a12);
  const double l1 = mean - radius;
  const double l2 = mean + radius;
  const double c1 = std::clamp(l1, lo, hi);
  const double c2 = std::clamp(l2, lo, hi);
  if (c1 == l1 && c2 == l2) return m;
  if (radius == 0.0) return {c1, c1, 0.0};
  // Unit eigenvector of l2 is (cos t, sin t) with tan 2t = 2 a12 / (a11 - a22).
  const double cos2t = half_diff / radius;
  const double sin2t = m.a12 / radius;
  const double cc = 0.5 * (1.0 + cos2t);  // cos^2 t
  const double ss = 0.5 * (1.0 - cos2t);  // sin^2 t
  const double cs = 0.5 * sin2t;          // cos t sin t
  return {c2 * cc + c1 * ss, c2 * ss + c1 * cc, (c2 - c1) * cs};
}

MatrixControlField project_spectral(const MatrixControlField& q, SpectralBounds bounds, double margin) {
  MatrixControlField out = q;
  const double lo = bounds.q_min + margin;
  const double hi = bounds.q_max - margin;
  for (std::size_t i = 0; i < q.size(); ++i) out.set(i, project_spectral(q.at(i), lo, hi));
  return out;
}

double control_inner(const FeSpace& space, const MatrixControlField& a, const MatrixControlField& b) {
  if (a.size() != space.size() || b.size() != space.size()) {
    throw DimensionError("control_inner: fields live on different meshes");
  }
  double s = 0.0;
  for (std::size_t c = 0; c < MatrixControlField::kComponents; ++c) {
    s += frobenius_weight(c) * l2_inner(space, a.comp[c], b.comp[c]);
  }
  return s;
}

double control_norm(const FeSpace& space, const MatrixControlField& a) {
  return std::sqrt(std::max(0.0, control_inner(space, a, a)));
}

MatrixControlField mass_apply(const FeSpace& space, const MatrixControlField& a) {
  if (a.size() != space.size()) throw DimensionError("mass_apply: size mismatch");
  MatrixControlField out(a.size());
  for (std::size_t c = 0; c < MatrixControlField::kComponents; ++c) {
    space.mass().multiply(a.comp[c], out.comp[c]);
    for (auto& v : out.comp[c]) v *= frobenius_weight(c);
  }
  return out;
}

MatrixControlField riesz(const FeSpace& space, const MatrixControlField& dual) {
  if (dual.size() != space.size()) throw DimensionError("riesz: size mismatch");
  MatrixControlField out(dual.size());
  for (std::size_t c = 0; c < MatrixControlField::kComponents; ++c) {
    std::vector<double> rhs = dual.comp[c];
    for (auto& v : rhs) v /= frobenius_weight(c);
    // Lumped-mass initial guess; the consistent mass is well conditioned.
    for (std::size_t i = 0; i < rhs.size(); ++i) out.comp[c][i] = rhs[i] / space.lumped_mass()[i];
    CgOptions options;
    options.tol = 1e-13;
    solve_spd(space.mass(), rhs, out.comp[c], options);
  }
  return out;
}

}  // namespace vicontrol
