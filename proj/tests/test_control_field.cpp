// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

#include "test_support.hpp"
#include "vicontrol/control_field.hpp"

using namespace vicontrol;
namespace ts = testing_support;

namespace {

const SpectralBounds kBounds{0.5, 10.0};

double barrier_value(const FeSpace& space, const MatrixControlField& q) { return barrier(space, q, kBounds).value; }

}  // namespace

TEST(Admissibility, IdentityIsAdmissible) {
  EXPECT_TRUE(check_admissible(MatrixControlField(9, Sym2{1, 1, 0}), kBounds).admissible);
}

TEST(Admissibility, LowerEigenvalueOnTheBoundaryIsRejected) {
  const auto r = check_admissible(MatrixControlField(9, Sym2{0.5, 1, 0}), kBounds);
  EXPECT_FALSE(r.admissible);
  EXPECT_EQ(r.violations, 9u);
  EXPECT_EQ(r.min_det_lower, 0.0);
}

TEST(Admissibility, InitialControlIsAdmissible) {
  const auto r = check_admissible(MatrixControlField(9, Sym2{2, 2, -1}), kBounds);
  EXPECT_TRUE(r.admissible);
  EXPECT_NEAR(r.min_det_lower, 0.5 * 2.5, 1e-15);  // eigenvalues 1, 3 shifted by 0.5
}

TEST(Admissibility, SingleBadNodeIsLocated) {
  MatrixControlField q(25, Sym2{2, 2, 0});
  q.set(13, {11, 2, 0});
  const auto r = check_admissible(q, kBounds);
  EXPECT_FALSE(r.admissible);
  EXPECT_EQ(r.violations, 1u);
  EXPECT_EQ(r.worst_node, 13u);
}

TEST(Barrier, ConstantIdentityClosedForm) {
  const FeSpace space(3);
  const double expected = -4.0 * (2 * std::log(0.5) + 2 * std::log(9.0));
  EXPECT_NEAR(barrier_value(space, MatrixControlField(space.size(), Sym2{1, 1, 0})), expected, 1e-12);
}

TEST(Barrier, MidpointHasZeroGradient) {
  const FeSpace space(3);
  const double mid = 0.5 * (kBounds.q_min + kBounds.q_max);
  const auto b = barrier(space, MatrixControlField(space.size(), Sym2{mid, mid, 0}), kBounds);
  ASSERT_TRUE(b.feasible);
  for (const auto& c : b.derivative.comp) {
    for (double v : c) EXPECT_NEAR(v, 0.0, 1e-15);
  }
}

TEST(Barrier, InfeasibleControlIsASentinelNotAnError) {
  const FeSpace space(2);
  MatrixControlField q(space.size(), Sym2{2, 2, 0});
  q.set(7, {0.4, 2, 0});
  const auto b = barrier(space, q, kBounds);
  EXPECT_FALSE(b.feasible);
  EXPECT_TRUE(std::isinf(b.value));
}

TEST(Barrier, DerivativeMatchesCentralDifferencesWithSecondOrder) {
  const FeSpace space(3);
  std::mt19937_64 rng(21);
  for (int point = 0; point < 3; ++point) {
    const auto q = ts::random_spd_field(space.size(), rng, 1.0, 8.0);
    MatrixControlField d(space.size());
    for (auto& c : d.comp) c = ts::random_vector(space.size(), rng);
    const double exact = barrier(space, q, kBounds).derivative.pair(d);
    const auto central = [&](double e) {
      auto qp = q, qm = q;
      qp.axpy(e, d);
      qm.axpy(-e, d);
      return (barrier_value(space, qp) - barrier_value(space, qm)) / (2 * e);
    };
    EXPECT_NEAR(central(1e-5), exact, 1e-6 * std::abs(exact));
    const double e1 = std::abs(central(2e-2) - exact);
    const double e2 = std::abs(central(1e-2) - exact);
    EXPECT_GE(std::log2(e1 / e2), 1.9);
  }
}

TEST(Barrier, BlowsUpMonotonicallyTowardsTheBoundary) {
  const FeSpace space(2);
  const Sym2 inside{2, 2, -1};
  const Sym2 edge{0.5, 1, 0};
  double prev = -std::numeric_limits<double>::infinity();
  for (double t : {0.0, 0.5, 0.9, 0.99, 0.999, 0.9999}) {
    const double v = barrier_value(space, MatrixControlField(space.size(), (1 - t) * inside + t * edge));
    EXPECT_GT(v, prev);
    prev = v;
  }
  EXPECT_TRUE(std::isinf(barrier_value(space, MatrixControlField(space.size(), edge))));
}

TEST(Projection, FeasibleControlIsAFixedPoint) {
  const auto q = MatrixControlField(9, Sym2{2, 2, -1});
  const auto p = project_spectral(q, kBounds, 0.0);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_LE(ts::max_abs_diff(p.comp[c], q.comp[c]), 1e-14);
}

TEST(Projection, DiagonalClamp) {
  const auto p = project_spectral(Sym2{0, 20, 0}, 0.5, 10.0);
  EXPECT_NEAR(p.a11, 0.5, 1e-15);
  EXPECT_NEAR(p.a22, 10.0, 1e-15);
  EXPECT_NEAR(p.a12, 0.0, 1e-15);
}

TEST(Projection, HandEigenDecomposition) {
  // eigenvalues 1 (vector (1,1)) and 3 (vector (1,-1)); 1 -> 1.5
  const auto p = project_spectral(Sym2{2, 2, -1}, 1.5, 10.0);
  EXPECT_NEAR(p.a11, 2.25, 1e-14);
  EXPECT_NEAR(p.a22, 2.25, 1e-14);
  EXPECT_NEAR(p.a12, -0.75, 1e-14);
}

TEST(Projection, MatchesEigenSolverAndIsAdmissible) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-15.0, 25.0);
  MatrixControlField q(200);
  for (std::size_t i = 0; i < q.size(); ++i) q.set(i, {u(rng), u(rng), 0.5 * u(rng)});
  const double margin = 1e-6;
  const auto p = project_spectral(q, kBounds, margin);
  EXPECT_TRUE(check_admissible(p, kBounds).admissible);
  for (std::size_t i = 0; i < q.size(); ++i) {
    const auto m = q.at(i);
    Eigen::Matrix2d a;
    a << m.a11, m.a12, m.a12, m.a22;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(a);
    Eigen::Vector2d ev = es.eigenvalues();
    for (int k = 0; k < 2; ++k) ev(k) = std::clamp(ev(k), kBounds.q_min + margin, kBounds.q_max - margin);
    const Eigen::Matrix2d r = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    const auto got = p.at(i);
    EXPECT_NEAR(got.a11, r(0, 0), 1e-12);
    EXPECT_NEAR(got.a22, r(1, 1), 1e-12);
    EXPECT_NEAR(got.a12, r(0, 1), 1e-12);
  }
}

TEST(ControlInner, ConstantFields) {
  const FeSpace space(3);
  const MatrixControlField eye(space.size(), Sym2{1, 1, 0});
  EXPECT_NEAR(control_inner(space, eye, eye), 8.0, 1e-12);
  const MatrixControlField off(space.size(), Sym2{0, 0, 1});
  EXPECT_NEAR(control_inner(space, off, off), 8.0, 1e-12);
  EXPECT_NEAR(control_norm(space, off), std::sqrt(8.0), 1e-12);
}

TEST(ControlInner, Symmetric) {
  const FeSpace space(3);
  std::mt19937_64 rng(12);
  MatrixControlField a(space.size()), b(space.size());
  for (std::size_t c = 0; c < 3; ++c) {
    a.comp[c] = ts::random_vector(space.size(), rng);
    b.comp[c] = ts::random_vector(space.size(), rng);
  }
  EXPECT_NEAR(control_inner(space, a, b), control_inner(space, b, a), 1e-14);
}

TEST(Riesz, RepresentsTheDualPairing) {
  const FeSpace space(3);
  std::mt19937_64 rng(14);
  MatrixControlField dual(space.size()), d(space.size());
  for (std::size_t c = 0; c < 3; ++c) {
    dual.comp[c] = ts::random_vector(space.size(), rng);
    d.comp[c] = ts::random_vector(space.size(), rng);
  }
  const auto g = riesz(space, dual);
  EXPECT_NEAR(control_inner(space, g, d), dual.pair(d), 1e-10 * (1 + std::abs(dual.pair(d))));
  const auto back = mass_apply(space, g);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_LE(ts::max_abs_diff(back.comp[c], dual.comp[c]), 1e-10);
}

TEST(MatrixField, Arithmetic) {
  MatrixControlField a(3, Sym2{1, 2, 3});
  const MatrixControlField b(3, Sym2{0.5, 0.5, -1});
  const auto s = a + b;
  EXPECT_EQ(s.at(1).a12, 2.0);
  EXPECT_EQ((a - b).at(2).a11, 0.5);
  EXPECT_EQ(a.scaled(2).at(0).a22, 4.0);
  a.axpy(2, b);
  EXPECT_EQ(a.at(0).a11, 2.0);
  EXPECT_EQ(b.pair(b), 3 * (0.25 + 0.25 + 1));
}
