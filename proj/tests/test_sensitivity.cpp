// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_support.hpp"
#include "vicontrol/sensitivity.hpp"

using namespace vicontrol;
namespace ts = testing_support;

namespace {

constexpr double kPsi = 0.5;

MatrixControlField desired_control(const StructuredMesh& mesh) {
  MatrixControlField q(mesh.num_nodes());
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i) q.set(i, {1 + mesh.node(i).x * mesh.node(i).x, 1.0, 0.0});
  return q;
}

ObjectiveConfig objective(const FeSpace& space) {
  ObjectiveConfig cfg;
  cfg.u_d = interpolate(space.mesh(), ts::model_ud);
  cfg.q_d = desired_control(space.mesh());
  cfg.bounds = {0.5, 10.0};
  return cfg;
}

MatrixControlField q_init(const FeSpace& space) { return MatrixControlField(space.size(), Sym2{2, 2, -1}); }

// theta (P(q + r) - q), so q + t d is admissible for t <= 1 / theta
MatrixControlField direction(const FeSpace& space, const MatrixControlField& q, std::mt19937_64& rng, double amp = 1.0) {
  MatrixControlField r(space.size());
  for (auto& c : r.comp) c = ts::random_vector(space.size(), rng, -amp, amp);
  auto p = project_spectral(q + r, {0.5, 10.0}, 1e-6);
  return (p - q).scaled(0.5);
}

double l2_diff(const FeSpace& space, const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return l2_norm(space, d);
}

std::vector<double> quotient_errors(const FeSpace& space, const MatrixControlField& q, const MatrixControlField& d,
                                    const ScalarField& f, double psi, const std::vector<double>& steps) {
  const auto base = solve_vi(space, q, f, psi);
  const auto cone = build_critical_cone(space.mesh(), base);
  const auto ut = directional_derivative(space, q, d, base.u, cone).u;
  std::vector<double> err;
  for (double t : steps) {
    auto qt = q;
    qt.axpy(t, d);
    const auto ut_fd = solve_vi(space, qt, f, psi).u;
    std::vector<double> quot(ut_fd.size());
    for (std::size_t i = 0; i < quot.size(); ++i) quot[i] = (ut_fd[i] - base.u[i]) / t;
    err.push_back(l2_diff(space, quot, ut));
  }
  return err;
}

CsrMatrix two_by_two() { return CsrMatrix({0, 2, 4}, {0, 1, 0, 1}, {2.0, -1.0, -1.0, 2.0}); }

CriticalCone cone_of(std::vector<char> zero, std::vector<char> nonpositive, std::vector<char> free_nodes) {
  return CriticalCone{std::move(zero), std::move(nonpositive), std::move(free_nodes)};
}

struct Reference {
  FeSpace space{4};
  ScalarField f = assemble_load(space, ts::model_f);
  ObjectiveConfig cfg = objective(space);
  OptResult opt;
  VISolution sol;
  Reference() {
    LoopConfig loop;
    loop.step_rule = StepRule::BarzilaiBorwein;
    loop.rel_tol = 1e-10;
    opt = solve_vi_constrained(space, q_init(space), cfg, f, kPsi, {}, loop);
    sol = solve_vi(space, opt.final.q, f, kPsi);
  }
};

const Reference& reference() {
  static const Reference r;
  return r;
}

}  // namespace

TEST(CriticalCone, PartitionsTheInteriorNodes) {
  const auto& ref = reference();
  const auto& mesh = ref.space.mesh();
  const auto cone = build_critical_cone(mesh, ref.sol);
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
    const int n = cone.zero_nodes[i] + cone.nonpositive_nodes[i] + cone.free_nodes[i];
    EXPECT_EQ(n, mesh.is_boundary(i) ? 0 : 1) << "node " << i;
    if (cone.zero_nodes[i] || cone.nonpositive_nodes[i]) {
      EXPECT_TRUE(ref.sol.active[i]);
    }
    if (cone.zero_nodes[i]) {
      EXPECT_GT(ref.sol.lambda[i], 0.0);
    }
  }
  EXPECT_GT(cone.count_zero(), 0u);
  EXPECT_EQ(cone.count_zero() + cone.count_nonpositive() + cone.count_free(), mesh.num_interior());
}

TEST(CriticalCone, TieAtTheThresholdGoesToTheNonpositiveSet) {
  const FeSpace space(2);
  VISolution sol;
  sol.u.assign(space.size(), 0.0);
  sol.lambda.assign(space.size(), 0.0);
  sol.active.assign(space.size(), 0);
  sol.f_norm = 1.0;
  const std::size_t a = space.mesh().node_index(1, 1), b = space.mesh().node_index(2, 2);
  sol.active[a] = sol.active[b] = 1;
  sol.lambda[a] = 1e-3;  // exactly at tol * f_norm
  sol.lambda[b] = 2e-3;
  const auto cone = build_critical_cone(space.mesh(), sol, 1e-3);
  EXPECT_TRUE(cone.nonpositive_nodes[a]);
  EXPECT_TRUE(cone.zero_nodes[b]);
  EXPECT_FALSE(cone.is_subspace());
}

TEST(CriticalCone, NoContactGivesTheWholeSpace) {
  const FeSpace space(3);
  const auto f = assemble_load(space, ts::model_f);
  const auto sol = solve_vi(space, q_init(space), f, 1e6);
  const auto cone = build_critical_cone(space.mesh(), sol);
  EXPECT_EQ(cone.count_zero(), 0u);
  EXPECT_EQ(cone.count_nonpositive(), 0u);
  EXPECT_TRUE(cone.is_subspace());
}

TEST(DirectionalDerivative, ZeroDirection) {
  const auto& ref = reference();
  const auto cone = build_critical_cone(ref.space.mesh(), ref.sol);
  const auto r = directional_derivative(ref.space, ref.opt.final.q, MatrixControlField(ref.space.size()), ref.sol.u, cone);
  for (double v : r.u) EXPECT_EQ(v, 0.0);
}

TEST(DirectionalDerivative, ProportionalCoefficientScalesTheState) {
  const FeSpace space(4);
  const auto f = assemble_load(space, ts::model_f);
  const MatrixControlField eye(space.size(), Sym2{1, 1, 0});
  const auto sol = solve_vi(space, eye, f, 1e6);
  const auto cone = build_critical_cone(space.mesh(), sol);
  const double eps = 0.3;
  const auto r = directional_derivative(space, eye, eye.scaled(eps), sol.u, cone);
  for (std::size_t i = 0; i < space.size(); ++i) EXPECT_NEAR(r.u[i], -eps * sol.u[i], 1e-10);
  for (double l : r.lambda) EXPECT_EQ(l, 0.0);
}

TEST(DirectionalDerivative, PositivelyHomogeneous) {
  const auto& ref = reference();
  const auto cone = build_critical_cone(ref.space.mesh(), ref.sol);
  std::mt19937_64 rng(17);
  const auto d = direction(ref.space, ref.opt.final.q, rng);
  const auto base = directional_derivative(ref.space, ref.opt.final.q, d, ref.sol.u, cone).u;
  for (double s : {0.5, 2.0}) {
    const auto scaled = directional_derivative(ref.space, ref.opt.final.q, d.scaled(s), ref.sol.u, cone).u;
    for (std::size_t i = 0; i < base.size(); ++i) EXPECT_NEAR(scaled[i], s * base[i], 1e-10);
  }
}

TEST(DirectionalDerivative, OutputLiesInTheConeAndPassesTheResiduals) {
  const auto& ref = reference();
  const auto cone = build_critical_cone(ref.space.mesh(), ref.sol);
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 3; ++trial) {
    const auto d = direction(ref.space, ref.opt.final.q, rng);
    const auto r = directional_derivative(ref.space, ref.opt.final.q, d, ref.sol.u, cone);
    for (std::size_t i = 0; i < r.u.size(); ++i) {
      if (cone.zero_nodes[i]) {
        EXPECT_EQ(r.u[i], 0.0);
      }
      if (cone.nonpositive_nodes[i]) {
        EXPECT_LE(r.u[i], 1e-12);
      }
    }
    const auto res = derivative_complementarity_check(ref.space, ref.opt.final.q, d, ref.sol.u, r.u, cone);
    EXPECT_LE(res.max(), 1e-8);
  }
}

TEST(DirectionalDerivative, LinearCaseHasAZeroMultiplier) {
  const FeSpace space(3);
  const auto f = assemble_load(space, ts::model_f);
  const auto q = q_init(space);
  const auto sol = solve_vi(space, q, f, 1e6);
  const auto cone = build_critical_cone(space.mesh(), sol);
  std::mt19937_64 rng(23);
  const auto d = direction(space, q, rng);
  const auto r = directional_derivative(space, q, d, sol.u, cone);
  for (double l : r.lambda) EXPECT_EQ(l, 0.0);
  EXPECT_LE(derivative_complementarity_check(space, q, d, sol.u, r.u, cone).polarity, 1e-8);
}

TEST(ConeVi, HandTwoNodeInstanceWithAnActiveSign) {
  // unconstrained minimizer (5/3, 7/3) violates u0 <= 0: u = (0, 3/2), lambda0 = 1 + 3/2
  const auto k = two_by_two();
  const std::vector<double> rhs{1.0, 3.0}, lumped{1.0, 1.0};
  const auto cone = cone_of({0, 0}, {1, 0}, {0, 1});
  const auto r = solve_cone_vi(k, rhs, lumped, cone);
  EXPECT_NEAR(r.u[0], 0.0, 1e-15);
  EXPECT_NEAR(r.u[1], 1.5, 1e-14);
  EXPECT_NEAR(r.lambda[0], 2.5, 1e-14);
  EXPECT_EQ(r.lambda[1], 0.0);
  EXPECT_LE(cone_residuals(k, rhs, lumped, r.u, cone).max(), 1e-14);
}

TEST(ConeVi, HandTwoNodeInstanceWithAnInactiveSign) {
  const auto k = two_by_two();
  const std::vector<double> rhs{-2.0, 3.0}, lumped{0.5, 0.5};
  const auto r = solve_cone_vi(k, rhs, lumped, cone_of({0, 0}, {1, 0}, {0, 1}));
  EXPECT_NEAR(r.u[0], -1.0 / 3.0, 1e-14);
  EXPECT_NEAR(r.u[1], 4.0 / 3.0, 1e-14);
  EXPECT_NEAR(r.lambda[0], 0.0, 1e-14);

  // pinned node: lambda takes either sign
  const auto z = solve_cone_vi(k, rhs, lumped, cone_of({1, 0}, {0, 0}, {0, 1}));
  EXPECT_EQ(z.u[0], 0.0);
  EXPECT_NEAR(z.u[1], 1.5, 1e-14);
  EXPECT_NEAR(z.lambda[0], (-2.0 + 1.5) / 0.5, 1e-14);
}

TEST(ConeVi, ResidualsDetectHandViolations) {
  const auto k = two_by_two();
  const std::vector<double> rhs{1.0, 3.0}, lumped{1.0, 1.0};
  const auto cone = cone_of({0, 0}, {1, 0}, {0, 1});
  // u = (0.25, 1.5): Ku = (-1, 2.75), lambda = (2, 0.25)
  const auto r = cone_residuals(k, rhs, lumped, std::vector<double>{0.25, 1.5}, cone);
  EXPECT_NEAR(r.cone_feasibility, 0.25, 1e-15);
  EXPECT_NEAR(r.polarity, 0.25, 1e-15);
  EXPECT_NEAR(r.complementarity, 0.5, 1e-15);
}

TEST(DifferenceQuotients, DecreaseInTheContactRegime) {
  const auto& ref = reference();
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 3; ++trial) {
    const auto d = direction(ref.space, ref.opt.final.q, rng);
    const auto err = quotient_errors(ref.space, ref.opt.final.q, d, ref.f, kPsi, {1e-2, 1e-3, 1e-4});
    EXPECT_LT(err[1], err[0]) << "direction " << trial;
    EXPECT_LT(err[2], err[1]) << "direction " << trial;
  }
}

TEST(DifferenceQuotients, FirstOrderWithoutContact) {
  const FeSpace space(4);
  const auto f = assemble_load(space, ts::model_f);
  std::mt19937_64 rng(31);
  const auto q = q_init(space);
  for (int trial = 0; trial < 3; ++trial) {
    const auto d = direction(space, q, rng);
    const auto err = quotient_errors(space, q, d, f, 1e6, {1e-2, 1e-3, 1e-4});
    for (std::size_t j = 1; j < err.size(); ++j) EXPECT_GE(std::log10(err[j - 1] / err[j]), 0.9);
  }
}

TEST(FirstOrder, CandidateEqualToTheControlGivesZero) {
  const auto& ref = reference();
  const std::vector<MatrixControlField> candidates{ref.opt.final.q};
  const auto r = primal_first_order_check(ref.space, ref.opt.final.q, ref.sol, candidates, ref.cfg);
  ASSERT_EQ(r.values.size(), 1u);
  EXPECT_EQ(r.values[0], 0.0);
}

TEST(FirstOrder, NonnegativeAtTheOptimum) {
  const auto& ref = reference();
  std::mt19937_64 rng(37);
  std::vector<MatrixControlField> candidates;
  for (int k = 0; k < 20; ++k) {
    MatrixControlField r(ref.space.size());
    for (auto& c : r.comp) c = ts::random_vector(ref.space.size(), rng);
    candidates.push_back(project_spectral(ref.opt.final.q + r, ref.cfg.bounds, 1e-6));
  }
  const auto r = primal_first_order_check(ref.space, ref.opt.final.q, ref.sol, candidates, ref.cfg);
  EXPECT_GT(r.scale, 0.0);
  EXPECT_GE(r.min_value, -1e-6 * r.scale);
}

TEST(FirstOrder, DescentDirectionAtTheStart) {
  const auto& ref = reference();
  const auto q0 = q_init(ref.space);
  const auto sol = solve_vi(ref.space, q0, ref.f, kPsi);
  std::mt19937_64 rng(41);
  std::vector<MatrixControlField> candidates{ref.opt.final.q};
  for (int k = 0; k < 20; ++k) {
    MatrixControlField r(ref.space.size());
    for (auto& c : r.comp) c = ts::random_vector(ref.space.size(), rng);
    candidates.push_back(project_spectral(q0 + r, ref.cfg.bounds, 1e-6));
  }
  const auto r = primal_first_order_check(ref.space, q0, sol, candidates, ref.cfg);
  EXPECT_LT(r.min_value, 0.0);
}
