// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "vicontrol/sparse.hpp"

namespace vicontrol {

struct LinearSolveReport {
  int iterations = 0;
  double residual_norm = 0.0;  // final ||b - A x||_2 on the free rows
  std::string method = "pcg-jacobi";
};

struct CgOptions {
  double tol = 1e-12;  // relative to ||b|| on the free rows
  int max_iters = 0;   // 0: 10 * (number of free rows) + 100
  /// Called with (iteration, current iterate) after each update.
  std::function<void(int, std::span<const double>)> on_iterate;
};

/// Jacobi-preconditioned conjugate gradients for A x = b.
///
/// Rows flagged in `fixed` are treated as eliminated: x keeps its incoming
/// value there and the corresponding columns are moved to the right-hand
/// side. x is used as the initial guess on the free rows. Throws SolverError
/// when the iteration cap is reached.
LinearSolveReport solve_spd(const CsrMatrix& a, std::span<const double> b, std::span<double> x,
                            const CgOptions& options = {}, const std::vector<char>* fixed = nullptr);

/// Convenience overload returning the solution; fixed rows carry zero.
[[nodiscard]] std::vector<double> solve_spd(const CsrMatrix& a, std::span<const double> b, double tol,
                                            const std::vector<char>* fixed = nullptr,
                                            LinearSolveReport* report = nullptr);

}  // namespace vicontrol
