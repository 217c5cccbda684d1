// SPDX-License-Identifier: Apache-2.0

#include "vicontrol/sparse.hpp"

#include <algorithm>
#include <cmath>

#include "vicontrol/errors.hpp"

namespace vicontrol {

CsrMatrix::CsrMatrix(std::vector<std::size_t> row_offsets, std::vector<std::uint32_t> cols,
                     std::vector<double> values)
    : row_offsets_(std::move(row_offsets)), cols_(std::move(cols)), values_(std::move(values)) {
  if (row_offsets_.empty() || row_offsets_.back() != cols_.size() || cols_.size() != values_.size()) {
    throw DimensionError("inconsistent CSR arrays");
  }
}

std::size_t CsrMatrix::find(std::size_t i, std::size_t j) const noexcept {
  const auto first = cols_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[i]);
  const auto last = cols_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[i + 1]);
  const auto it = std::lower_bound(first, last, static_cast<std::uint32_t>(j));
  if (it == last || *it != j) return nnz();
  return static_cast<std::size_t>(it - cols_.begin());
}

double CsrMatrix::operator()(std::size_t i, std::size_t j) const noexcept {
  const auto k = find(i, j);
  return k == nnz() ? 0.0 : values_[k];
}

void CsrMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  if (x.size() != rows() || y.size() != rows()) {
    throw DimensionError("CsrMatrix::multiply: size mismatch");
  }
  const std::size_t n = rows();
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) s += values_[k] * x[cols_[k]];
    y[i] = s;
  }
}

std::vector<double> CsrMatrix::multiply(std::span<const double> x) const {
  std::vector<double> y(rows());
  multiply(x, y);
  return y;
}

double CsrMatrix::quadratic_form(std::span<const double> x) const {
  const auto y = multiply(x);
  return dot(x, y);
}

std::vector<double> CsrMatrix::diagonal() const {
  std::vector<double> d(rows(), 0.0);
  for (std::size_t i = 0; i < rows(); ++i) d[i] = (*this)(i, i);
  return d;
}

void CsrMatrix::add_scaled(const CsrMatrix& other, double s) {
  if (other.cols_ != cols_ || other.row_offsets_ != row_offsets_) {
    throw DimensionError("CsrMatrix::add_scaled: pattern mismatch");
  }
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += s * other.values_[k];
}

void CsrMatrix::scale(double s) {
  for (auto& v : values_) v *= s;
}

double CsrMatrix::symmetry_defect() const {
  double max_entry = 0.0;
  double max_defect = 0.0;
  for (std::size_t i = 0; i < rows(); ++i) {
    for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
      max_entry = std::max(max_entry, std::abs(values_[k]));
      const auto kt = find(cols_[k], i);
      const double at = kt == nnz() ? 0.0 : values_[kt];
      max_defect = std::max(max_defect, std::abs(values_[k] - at));
    }
  }
  return max_entry > 0.0 ? max_defect / max_entry : 0.0;
}

CsrMatrix eliminate_rows(const CsrMatrix& a, const std::vector<char>& mask) {
  if (mask.size() != a.rows()) throw DimensionError("eliminate_rows: mask size mismatch");
  CsrMatrix out = a;
  auto& v = out.values();
  const auto& offsets = a.row_offsets();
  const auto& cols = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) {
      const std::size_t j = cols[k];
      if (mask[i] || mask[j]) v[k] = (i == j) ? 1.0 : 0.0;
    }
  }
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace vicontrol
