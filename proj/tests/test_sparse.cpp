// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"
#include "vicontrol/errors.hpp"
#include "vicontrol/fem.hpp"
#include "vicontrol/sparse.hpp"

using namespace vicontrol;

namespace {

// [[4, 1, 0], [1, 3, 2], [0, 2, 5]]
CsrMatrix small() { return CsrMatrix({0, 2, 5, 7}, {0, 1, 0, 1, 2, 1, 2}, {4, 1, 1, 3, 2, 2, 5}); }

}  // namespace

TEST(CsrMatrix, EntryAccessAndFind) {
  const auto a = small();
  EXPECT_EQ(a.rows(), 3u);
  EXPECT_EQ(a.nnz(), 7u);
  EXPECT_EQ(a(1, 2), 2.0);
  EXPECT_EQ(a(0, 2), 0.0);
  EXPECT_EQ(a.find(0, 2), a.nnz());
  EXPECT_EQ(a.find(2, 2), 6u);
}

TEST(CsrMatrix, MultiplyMatchesHandProduct) {
  const auto a = small();
  const std::vector<double> x = {1, -2, 3};
  const auto y = a.multiply(x);
  EXPECT_EQ(y, (std::vector<double>{2, 1, 11}));
  EXPECT_DOUBLE_EQ(a.quadratic_form(x), 2 - 2 + 33);
  EXPECT_EQ(a.diagonal(), (std::vector<double>{4, 3, 5}));
}

TEST(CsrMatrix, RejectsInconsistentArrays) {
  EXPECT_THROW(CsrMatrix({0, 2}, {0}, {1.0}), DimensionError);
  EXPECT_THROW(CsrMatrix({}, {}, {}), DimensionError);
  const auto a = small();
  std::vector<double> x(2);
  EXPECT_THROW((void)a.multiply(x), DimensionError);
}

TEST(CsrMatrix, AddScaledRequiresMatchingPattern) {
  auto a = small();
  a.add_scaled(small(), 2.0);
  EXPECT_EQ(a(1, 1), 9.0);
  const CsrMatrix diag({0, 1, 2, 3}, {0, 1, 2}, {1, 1, 1});
  EXPECT_THROW(a.add_scaled(diag, 1.0), DimensionError);
  a.scale(0.5);
  EXPECT_EQ(a(2, 2), 7.5);
}

TEST(CsrMatrix, SymmetryDefect) {
  EXPECT_EQ(small().symmetry_defect(), 0.0);
  auto a = small();
  a.values()[a.find(0, 1)] = 1.5;
  EXPECT_NEAR(a.symmetry_defect(), 0.5 / 5.0, 1e-15);
}

TEST(CsrMatrix, EliminationGivesIdentityRowsAndColumns) {
  const FeSpace space(3);
  const auto k = eliminate_rows(space.laplace(), space.mesh().boundary_mask());
  for (std::size_t i = 0; i < k.rows(); ++i) {
    for (std::size_t p = k.row_offsets()[i]; p < k.row_offsets()[i + 1]; ++p) {
      const std::size_t j = k.cols()[p];
      if (space.mesh().is_boundary(i) || space.mesh().is_boundary(j)) {
        EXPECT_EQ(k.values()[p], i == j ? 1.0 : 0.0);
      } else {
        EXPECT_EQ(k.values()[p], space.laplace()(i, j));
      }
    }
  }
  EXPECT_LE(k.symmetry_defect(), 1e-12);
}

TEST(Sparse, DotAndNorm) {
  const std::vector<double> a = {3, 4};
  EXPECT_EQ(norm2(a), 5.0);
  EXPECT_EQ(dot(a, std::vector<double>{1, -1}), -1.0);
}

TEST(CsrMatrix, MultiplyMatchesDenseOracle) {
  const FeSpace space(3);
  std::mt19937_64 rng(5);
  const auto q = testing_support::random_spd_field(space.size(), rng, 1.0, 4.0);
  const auto k = assemble_stiffness(space, q);
  const auto x = testing_support::random_vector(space.size(), rng);
  const Eigen::VectorXd xd = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  const Eigen::VectorXd yd = testing_support::to_dense(k) * xd;
  const auto y = k.multiply(x);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], yd(static_cast<Eigen::Index>(i)), 1e-12);
}
