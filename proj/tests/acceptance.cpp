// SPDX-License-Identifier: Apache-2.0

// One PASS/FAIL line per acceptance criterion. `--quick` skips the level-7 run.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>

#include "vicontrol/experiments.hpp"

using namespace vicontrol;
namespace fs = std::filesystem;

namespace {

constexpr std::array<double, 5> kTableErrU{3.79579e-1, 1.41644e-1, 1.59084e-2, 1.6923e-3, 2.0242e-4};
constexpr std::array<double, 5> kTableErrQ{1.8927e-1, 6.47868e-2, 7.76552e-3, 3.57287e-3, 4.39335e-4};
constexpr double kLevel7ErrU = 1.81648e-4;
constexpr double kFactor = 5.0;

int failures = 0;

void report(int id, const std::string& status, const std::string& what, const std::string& detail) {
  std::printf("criterion %2d: %s  %s (%s)\n", id, status.c_str(), what.c_str(), detail.c_str());
  std::fflush(stdout);
  if (status == "FAIL") ++failures;
}

void verdict(int id, bool ok, const std::string& what, const std::string& detail) {
  report(id, ok ? "PASS" : "FAIL", what, detail);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

bool within_factor(double got, double want) { return got <= kFactor * want && got >= want / kFactor; }

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("vicontrol_acceptance_" + std::to_string(::getpid())) / name;
  fs::create_directories(p);
  return p;
}

ExperimentConfig config(int level, const fs::path& out) {
  ExperimentConfig cfg;
  cfg.level = level;
  cfg.output_dir = out;
  return cfg;
}

std::map<std::string, std::string> csv_files(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() != ".csv") continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    out[e.path().filename().string()] = ss.str();
  }
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

MatrixControlField random_spd(std::size_t n, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> ev(lo, hi), angle(0.0, M_PI);
  MatrixControlField q(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = ev(rng), b = ev(rng), t = angle(rng);
    const double c = std::cos(t), s = std::sin(t);
    q.set(i, {a * c * c + b * s * s, a * s * s + b * c * c, (a - b) * c * s});
  }
  return q;
}

}  // namespace

int main(int argc, char** argv) {
  bool quick = false;
  for (int i = 1; i < argc; ++i) quick = quick || std::strcmp(argv[i], "--quick") == 0;
  const auto t_all = std::chrono::steady_clock::now();

  // 1, 8, 9: level-5 gamma table and the reference run
  const auto run_a = scratch("a");
  auto t0 = std::chrono::steady_clock::now();
  const auto ex2 = run_example2(config(5, run_a));
  const double t_ex2 = seconds_since(t0);
  {
    bool ok = ex2.rows.size() == kTableErrU.size();
    std::string detail;
    for (std::size_t j = 0; ok && j < ex2.rows.size(); ++j) {
      const auto& r = ex2.rows[j];
      ok = ok && within_factor(r.err_u, kTableErrU[j]) && within_factor(r.err_q, kTableErrQ[j]);
      if (j > 0) ok = ok && r.err_u < ex2.rows[j - 1].err_u;
      detail += fmt("%sg=%.0e u %.3e/%.3e q %.3e/%.3e", j ? "; " : "", r.gamma, r.err_u, kTableErrU[j], r.err_q,
                    kTableErrQ[j]);
    }
    ok = ok && t_ex2 < 600.0;
    verdict(1, ok, "gamma table at level 5, err_u decreasing, entries within 5x", detail + fmt("; %.1f s", t_ex2));
  }

  // 2
  if (quick) {
    report(2, "SKIP", "level-7 err_u at gamma=1e12 within 5x", "--quick");
  } else {
    t0 = std::chrono::steady_clock::now();
    auto cfg = config(7, scratch("level7"));
    cfg.gamma_list = {1e0, 1e3, 1e6, 1e9, 1e12};
    const auto r = run_example2(cfg);
    const double t7 = seconds_since(t0);
    const double err = r.rows.back().err_u;
    verdict(2, within_factor(err, kLevel7ErrU) && t7 < 3600.0, "level-7 err_u at gamma=1e12 within 5x",
            fmt("err_u %.4e vs %.4e, %.1f s", err, kLevel7ErrU, t7));
  }

  // 3
  {
    const auto u = [](double x, double y) { return model_state(x, y); };
    const auto flux_div = [&](double x, double y) {
      const double e = 1e-4;
      const auto qx = [](double x) { return 1 + x * x; };
      const double dxp = qx(x + e / 2) * (u(x + e, y) - u(x, y)) / e;
      const double dxm = qx(x - e / 2) * (u(x, y) - u(x - e, y)) / e;
      const double dyy = (u(x, y + e) - 2 * u(x, y) + u(x, y - e)) / (e * e);
      return -(dxp - dxm) / e - dyy;
    };
    double identity = 0.0;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> pt(-0.99, 0.99);
    for (int k = 0; k < 200; ++k) {
      const double x = pt(rng), y = pt(rng);
      identity = std::max(identity, std::abs(flux_div(x, y) - model_load(x, y)));
      const auto q = model_control(x, y);
      identity = std::max(identity, std::abs(q.a11 - (1 + x * x)) + std::abs(q.a22 - 1) + std::abs(q.a12));
    }
    auto cfg = config(5, scratch("conv"));
    cfg.levels = {3, 4, 5};
    const auto c = run_convergence(cfg);
    bool ok = identity < 1e-5 && c.rows.size() == 3;
    std::string detail = fmt("identity residual %.1e", identity);
    for (std::size_t j = 1; j < c.rows.size(); ++j) {
      ok = ok && c.rows[j].rate >= 1.9;
      detail += fmt("; rate %d->%d %.4f", c.rows[j - 1].level, c.rows[j].level, c.rows[j].rate);
    }
    verdict(3, ok, "manufactured-solution L2 rate >= 1.9", detail);
  }

  // 4, 5
  {
    const FeSpace space(2);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> load(0.0, 20.0), obstacle(0.02, 0.4);
    double worst = 0.0;
    std::vector<std::pair<double, ComplementarityResiduals>> certs;  // scale, residuals
    const auto certify = [&](const FeSpace& s, const VISolution& sol, std::span<const double> f, double psi) {
      certs.emplace_back(load_density_norm(s, f) * 2.0 * psi, complementarity_residuals(s, sol, psi));
    };
    for (int trial = 0; trial < 5; ++trial) {
      const auto q = random_spd(space.size(), rng, 0.5, 10.0);
      const double a = load(rng), b = load(rng);
      const auto f = assemble_load(space, [&](double x, double y) { return a + b * x * y; });
      const double psi = obstacle(rng);
      const auto sol = solve_vi(space, q, f, psi);
      const auto k = assemble_stiffness(space, q);
      const auto oracle = oracle_active_set_enumeration(dense_interior_block(space.mesh(), k),
                                                        interior_values(space.mesh(), f), psi,
                                                        interior_values(space.mesh(), space.lumped_mass()));
      const auto got = interior_values(space.mesh(), sol.u);
      for (std::size_t i = 0; i < got.size(); ++i) worst = std::max(worst, std::abs(got[i] - oracle.u[i]));
      certify(space, sol, f, psi);
    }
    verdict(4, worst <= 1e-10, "level-2 PDAS matches active-set enumeration on 5 random instances",
            fmt("max nodal difference %.2e", worst));

    for (int level = 3; level <= 6; ++level) {
      const FeSpace s(level);
      const auto f = assemble_load(s, model_load);
      const MatrixControlField q0(s.size(), Sym2{2, 2, -1});
      for (double psi : {0.1, 0.3, 0.5, 1.0}) certify(s, solve_vi(s, q0, f, psi), f, psi);
    }
    const FeSpace s4(4);
    const auto f4 = assemble_load(s4, model_load);
    for (int k = 0; k < 20; ++k) certify(s4, solve_vi(s4, random_spd(s4.size(), rng, 0.5, 10.0), f4, 0.3), f4, 0.3);
    const Problem p(ExperimentConfig{}, 5);
    certify(p.space, ex2.reference.state, p.f_load, 0.5);

    double fu = 0.0, fl = 0.0, comp = 0.0;
    bool ok = true;
    for (const auto& [scale, r] : certs) {
      fu = std::max(fu, r.feas_u);
      fl = std::max(fl, r.feas_lambda);
      comp = std::max(comp, r.comp / scale);
      ok = ok && r.feas_u <= 1e-10 && r.feas_lambda <= 1e-10 && r.comp <= 1e-10 * scale;
    }
    verdict(5, ok, "complementarity certified on every VI solve",
            fmt("%zu solves, max (u-psi)+ %.1e, max (-lambda)+ %.1e, max comp/scale %.1e", certs.size(), fu, fl, comp));
  }

  // 6
  {
    auto cfg = config(3, scratch("grad"));
    cfg.gradcheck_gamma = 1e3;
    cfg.gradcheck_controls = 3;
    cfg.gradcheck_directions = 5;
    const auto r = run_gradcheck(cfg);
    verdict(6, r.max_rel_error <= 1e-4 && r.adjoint_rows.size() == 15, "adjoint vs central differences",
            fmt("%zu checks, max relative error %.2e", r.adjoint_rows.size(), r.max_rel_error));
  }

  // 7
  {
    auto cfg = config(5, scratch("sens"));
    cfg.sensitivity_directions = 3;
    cfg.sensitivity_steps = {1e-2, 1e-3, 1e-4};
    const auto r = run_sensitivity(cfg);
    verdict(7, r.contact_monotone && r.min_no_contact_order >= 0.9,
            "difference quotients converge to the directional derivative",
            fmt("contact errors monotone: %s; min no-contact order %.4f; cone %zu/%zu/%zu",
                r.contact_monotone ? "yes" : "no", r.min_no_contact_order, r.zero_nodes, r.nonpositive_nodes,
                r.free_nodes));
  }

  // 8
  {
    std::size_t iterates = ex2.reference.result.history.size();
    for (const auto& leg : ex2.legs) iterates += leg.result.history.size();
    verdict(8, ex2.infeasible_iterates == 0, "every accepted iterate strictly inside the spectral bounds",
            fmt("%zu iterates, %zu violations", iterates, ex2.infeasible_iterates));
  }

  // 9
  {
    const double ratio = ex2.reference.multiplier_ratio;
    report(9, ratio <= 4.5 ? "PASS" : "WARN", "multiplier bound ||lambda||/||f|| <= 4.5",
           fmt("ratio %.4f, gradient ratio %.4f", ratio, ex2.reference.gradient_ratio));
  }

  // 10
  {
    const auto run_all = [](const fs::path& dir) {
      (void)run_example1(config(5, dir));
      (void)run_example2(config(5, dir));
      auto conv = config(5, dir);
      conv.levels = {3, 4, 5};
      (void)run_convergence(conv);
      (void)run_gradcheck(config(3, dir));
      (void)run_sensitivity(config(5, dir));
    };
    const auto b = scratch("det_b"), c = scratch("det_c");
    run_all(b);
    run_all(c);
    const auto fb = csv_files(b), fc = csv_files(c);
    std::size_t same = 0;
    for (const auto& [name, text] : fb) {
      const auto it = fc.find(name);
      if (it != fc.end() && it->second == text) ++same;
    }
    verdict(10, !fb.empty() && same == fb.size() && fb.size() == fc.size(), "reruns give byte-identical CSV",
            fmt("%zu of %zu files identical", same, fb.size()));
  }

  std::error_code ec;
  fs::remove_all(fs::temp_directory_path() / ("vicontrol_acceptance_" + std::to_string(::getpid())), ec);
  std::printf("%s: %d failing criteria, %.1f s\n", failures ? "FAIL" : "PASS", failures, seconds_since(t_all));
  return failures ? 1 : 0;
}
