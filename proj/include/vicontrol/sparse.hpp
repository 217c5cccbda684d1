// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace vicontrol {

/// Compressed sparse row matrix with a structurally symmetric pattern.
/// Column indices are sorted within each row.
class CsrMatrix {
 public:
  CsrMatrix() = default;
  CsrMatrix(std::vector<std::size_t> row_offsets, std::vector<std::uint32_t> cols, std::vector<double> values);

  [[nodiscard]] std::size_t rows() const noexcept { return row_offsets_.empty() ? 0 : row_offsets_.size() - 1; }
  [[nodiscard]] std::size_t nnz() const noexcept { return values_.size(); }

  [[nodiscard]] const std::vector<std::size_t>& row_offsets() const noexcept { return row_offsets_; }
  [[nodiscard]] const std::vector<std::uint32_t>& cols() const noexcept { return cols_; }
  [[nodiscard]] const std::vector<double>& values() const noexcept { return values_; }
  [[nodiscard]] std::vector<double>& values() noexcept { return values_; }

  /// Entry (i, j), zero if outside the pattern.
  [[nodiscard]] double operator()(std::size_t i, std::size_t j) const noexcept;
  /// Position of (i, j) in values(), or nnz() if outside the pattern.
  [[nodiscard]] std::size_t find(std::size_t i, std::size_t j) const noexcept;

  /// y = A x
  void multiply(std::span<const double> x, std::span<double> y) const;
  [[nodiscard]] std::vector<double> multiply(std::span<const double> x) const;
  [[nodiscard]] double quadratic_form(std::span<const double> x) const;
  [[nodiscard]] std::vector<double> diagonal() const;

  /// this += s * other; patterns must coincide.
  void add_scaled(const CsrMatrix& other, double s);
  void scale(double s);

  /// Largest |a_ij - a_ji| relative to the largest |a_ij|.
  [[nodiscard]] double symmetry_defect() const;

 private:
  std::vector<std::size_t> row_offsets_;
  std::vector<std::uint32_t> cols_;
  std::vector<double> values_;
};

/// Copy of `a` with rows and columns of masked nodes replaced by identity.
[[nodiscard]] CsrMatrix eliminate_rows(const CsrMatrix& a, const std::vector<char>& mask);

[[nodiscard]] double dot(std::span<const double> a, std::span<const double> b);
[[nodiscard]] double norm2(std::span<const double> a);

}  // namespace vicontrol
