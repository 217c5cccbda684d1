// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace vicontrol {

using ScalarField = std::vector<double>;

/// Symmetric 2x2 matrix [[a11, a12], [a12, a22]].
struct Sym2 {
  double a11 = 0.0;
  double a22 = 0.0;
  double a12 = 0.0;

  [[nodiscard]] double det() const noexcept { return a11 * a22 - a12 * a12; }
  [[nodiscard]] double trace() const noexcept { return a11 + a22; }
  /// Inverse; caller guarantees det() != 0.
  [[nodiscard]] Sym2 inverse() const noexcept {
    const double d = det();
    return {a22 / d, a11 / d, -a12 / d};
  }
  [[nodiscard]] Sym2 shifted(double s) const noexcept { return {a11 + s, a22 + s, a12}; }
  [[nodiscard]] Sym2 operator-() const noexcept { return {-a11, -a22, -a12}; }
  friend Sym2 operator+(Sym2 a, Sym2 b) noexcept { return {a.a11 + b.a11, a.a22 + b.a22, a.a12 + b.a12}; }
  friend Sym2 operator-(Sym2 a, Sym2 b) noexcept { return {a.a11 - b.a11, a.a22 - b.a22, a.a12 - b.a12}; }
  friend Sym2 operator*(double s, Sym2 a) noexcept { return {s * a.a11, s * a.a22, s * a.a12}; }
};

/// Nodal symmetric matrix field: one (q11, q22, q12) triple per mesh node,
/// interpolated bilinearly inside cells.
///
/// The same layout stores derivative (dual) vectors with respect to the nodal
/// components; see ControlSpace::riesz for the conversion back to a field.
struct MatrixControlField {
  static constexpr std::size_t kComponents = 3;

  std::array<std::vector<double>, kComponents> comp;

  MatrixControlField() = default;
  explicit MatrixControlField(std::size_t n, Sym2 value = {}) {
    comp[0].assign(n, value.a11);
    comp[1].assign(n, value.a22);
    comp[2].assign(n, value.a12);
  }

  [[nodiscard]] std::size_t size() const noexcept { return comp[0].size(); }
  [[nodiscard]] std::vector<double>& q11() noexcept { return comp[0]; }
  [[nodiscard]] std::vector<double>& q22() noexcept { return comp[1]; }
  [[nodiscard]] std::vector<double>& q12() noexcept { return comp[2]; }
  [[nodiscard]] const std::vector<double>& q11() const noexcept { return comp[0]; }
  [[nodiscard]] const std::vector<double>& q22() const noexcept { return comp[1]; }
  [[nodiscard]] const std::vector<double>& q12() const noexcept { return comp[2]; }

  [[nodiscard]] Sym2 at(std::size_t i) const noexcept { return {comp[0][i], comp[1][i], comp[2][i]}; }
  void set(std::size_t i, Sym2 m) noexcept {
    comp[0][i] = m.a11;
    comp[1][i] = m.a22;
    comp[2][i] = m.a12;
  }

  /// this += s * other
  void axpy(double s, const MatrixControlField& other);
  [[nodiscard]] MatrixControlField operator-(const MatrixControlField& other) const;
  [[nodiscard]] MatrixControlField operator+(const MatrixControlField& other) const;
  [[nodiscard]] MatrixControlField scaled(double s) const;
  /// Euclidean pairing of all nodal components (dual vector against a direction).
  [[nodiscard]] double pair(const MatrixControlField& direction) const;

  bool operator==(const MatrixControlField&) const = default;
};

}  // namespace vicontrol
