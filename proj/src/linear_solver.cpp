// SPDX-License-Identifier: Apache-2.0

#include "vicontrol/linear_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "vicontrol/errors.hpp"

namespace vicontrol {

namespace {

// y = A x restricted to free rows, with x read only on free columns.
void masked_multiply(const CsrMatrix& a, std::span<const double> x, std::span<double> y,
                     const std::vector<char>* fixed) {
  const auto& offsets = a.row_offsets();
  const auto& cols = a.cols();
  const auto& values = a.values();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    if (fixed && (*fixed)[i]) {
      y[i] = 0.0;
      continue;
    }
    double s = 0.0;
    for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) {
      const auto j = cols[k];
      if (fixed && (*fixed)[j]) continue;
      s += values[k] * x[j];
    }
    y[i] = s;
  }
}

double free_norm(std::span<const double> v, const std::vector<char>* fixed) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (fixed && (*fixed)[i]) continue;
    s += v[i] * v[i];
  }
  return std::sqrt(s);
}

// r = b - A x on free rows (full x, so fixed values enter the right-hand side).
void residual(const CsrMatrix& a, std::span<const double> b, std::span<const double> x, std::span<double> r,
              const std::vector<char>* fixed) {
  a.multiply(x, r);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = (fixed && (*fixed)[i]) ? 0.0 : b[i] - r[i];
}

double inf_norm(const CsrMatrix& a) {
  const auto& offsets = a.row_offsets();
  const auto& values = a.values();
  double m = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) s += std::abs(values[k]);
    m = std::max(m, s);
  }
  return m;
}

}  // namespace

LinearSolveReport solve_spd(const CsrMatrix& a, std::span<const double> b, std::span<double> x,
                            const CgOptions& options, const std::vector<char>* fixed) {
  const std::size_t n = a.rows();
  if (b.size() != n || x.size() != n || (fixed && fixed->size() != n)) {
    throw DimensionError("solve_spd: size mismatch");
  }
  if (!(options.tol > 0.0)) throw SolverError("solve_spd: tolerance must be positive");

  std::size_t n_free = n;
  if (fixed) {
    for (char f : *fixed) n_free -= f ? 1 : 0;
  }
  const int max_iters = options.max_iters > 0 ? options.max_iters : static_cast<int>(10 * n_free + 100);

  // Norm of the reduced right-hand side b_f - A_fF x_F.
  std::vector<double> r(n), z(n), p(n), ap(n);
  {
    std::vector<double> x_fixed_only(x.begin(), x.end());
    for (std::size_t i = 0; i < n; ++i) {
      if (!(fixed && (*fixed)[i])) x_fixed_only[i] = 0.0;
    }
    residual(a, b, x_fixed_only, r, fixed);
  }
  const double b_norm = free_norm(r, fixed);
  LinearSolveReport report;
  if (b_norm == 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!(fixed && (*fixed)[i])) x[i] = 0.0;
    }
    return report;
  }
  const double target = options.tol * b_norm;

  std::vector<double> inv_diag = a.diagonal();
  for (auto& d : inv_diag) d = d > 0.0 ? 1.0 / d : 1.0;

  std::vector<double> history;
  int it = 0;
  // Restarts guard against drift between the recursive and the true residual.
  for (int restart = 0; restart < 4; ++restart) {
    residual(a, b, x, r, fixed);
    double r_norm = free_norm(r, fixed);
    report.residual_norm = r_norm;
    if (r_norm <= target) break;

    for (std::size_t i = 0; i < n; ++i) {
      z[i] = r[i] * inv_diag[i];
      p[i] = z[i];
    }
    double rz = dot(r, z);
    while (it < max_iters) {
      masked_multiply(a, p, ap, fixed);
      const double pap = dot(p, ap);
      if (!(pap > 0.0)) {
        std::ostringstream msg;
        msg << "solve_spd: operator not positive definite on the free block (p^T A p = " << pap << ")";
        throw SolverError(msg.str(), history);
      }
      const double step = rz / pap;
      for (std::size_t i = 0; i < n; ++i) {
        x[i] += step * p[i];
        r[i] -= step * ap[i];
      }
      ++it;
      if (options.on_iterate) options.on_iterate(it, x);
      r_norm = free_norm(r, fixed);
      history.push_back(r_norm);
      if (r_norm <= target) break;
      for (std::size_t i = 0; i < n; ++i) z[i] = r[i] * inv_diag[i];
      const double rz_new = dot(r, z);
      const double beta = rz_new / rz;
      rz = rz_new;
      for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    if (it >= max_iters) break;
  }

  residual(a, b, x, r, fixed);
  report.iterations = it;
  report.residual_norm = free_norm(r, fixed);
  // Residual at rounding level: normwise backward error of a few ulps.
  const double floor = 64.0 * std::numeric_limits<double>::epsilon() *
                       (inf_norm(a) * free_norm(x, fixed) + b_norm);
  if (report.residual_norm > target && report.residual_norm > floor) {
    std::ostringstream msg;
    msg << "solve_spd: no convergence after " << it << " iterations, relative residual "
        << report.residual_norm / b_norm << " > " << options.tol;
    throw SolverError(msg.str(), history);
  }
  return report;
}

std::vector<double> solve_spd(const CsrMatrix& a, std::span<const double> b, double tol,
                              const std::vector<char>* fixed, LinearSolveReport* report) {
  std::vector<double> x(a.rows(), 0.0);
  CgOptions options;
  options.tol = tol;
  const auto r = solve_spd(a, b, x, options, fixed);
  if (report) *report = r;
  return x;
}

}  // namespace vicontrol
