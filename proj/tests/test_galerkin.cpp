// spectral solver checks: exact per-mode heat decay, cross-solver
// convergence against the finite-volume scheme, and the structural
// invariants of the projected system
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "spde/coefficients.hpp"
#include "spde/galerkin.hpp"
#include "spde/grid.hpp"
#include "spde/noise.hpp"
#include "spde/solver.hpp"

using namespace spde;

namespace {

constexpr double kTau = 6.283185307179586476925287;

// project a sampled state onto the orthonormal member (wave m, sin/cos);
// exact for band-limited data on the cell-center grid
double coefficient_of(const State& s, int m, bool is_sin) {
  double acc = 0.0;
  for (int i = 0; i < s.grid.n; ++i) {
    double x = (i + 0.5) * s.grid.h;
    double e = m == 0 ? 1.0
                      : std::sqrt(2.0) * (is_sin ? std::sin(kTau * m * x) : std::cos(kTau * m * x));
    acc += e * s.rho[i];
  }
  return acc * s.grid.h;
}

NoisePath quiet_path(double dt, int steps) {
  return sample_path(build_basis(1, 0, "flat", 1.0, 0.0), dt, steps * dt, 3);
}

CoefficientSet cubic_set() {
  CoefficientSet cs;
  cs.name = "cubic";
  cs.phi = [](double x) { return x + x * x * x; };
  cs.dphi = [](double x) { return 1.0 + 3.0 * x * x; };
  cs.d2phi = [](double x) { return 6.0 * x; };
  return cs;
}

}  // namespace

TEST_CASE("every retained heat mode decays at its exact exponential rate") {
  Grid g = make_grid(1, 64);
  InitialData init;
  init.kind = "cosine2";
  init.mean = 1.0;
  init.amplitude = 0.4;
  State rho0 = make_initial(g, init);

  const double dt = 1e-4;
  const int steps = 100;
  Trajectory traj =
      solve_galerkin(rho0, steps * dt, preset("heat", {}), quiet_path(dt, steps), 6);
  CHECK(traj.scheme_used == "galerkin_lawson_euler");

  for (int m = 0; m <= 6; ++m)
    for (bool is_sin : {false, true}) {
      if (m == 0 && is_sin) continue;
      double want = coefficient_of(rho0, m, is_sin) * std::exp(-kTau * kTau * m * m * steps * dt);
      double got = coefficient_of(traj.final_state, m, is_sin);
      CHECK(std::abs(got - want) < 1e-12);
    }
}

TEST_CASE("zero initial data stays exactly zero") {
  Grid g = make_grid(1, 32);
  State rho0 = make_state(g, [](double, double) { return 0.0; });
  NoiseBasis basis = build_basis(1, 4, "flat", 1.0, 0.0);
  PresetParams p;
  p.epsilon = 0.1;
  p.F1 = eval_constants(basis).F1;
  CoefficientSet cs = preset("dean_kawasaki", p);

  const double dt = 1e-4;
  NoisePath path = sample_path(basis, dt, 50 * dt, 8);
  SolveOptions opt;
  opt.save_every = 1;
  Trajectory traj = solve_galerkin(rho0, 50 * dt, cs, path, 4, opt);
  for (double v : traj.series.min_rho) CHECK(v == 0.0);
  for (double v : traj.series.max_rho) CHECK(v == 0.0);
}

TEST_CASE("spectral and finite-volume solutions converge to each other") {
  // deterministic nonlinear diffusion Phi = id + cubic; the difference is
  // dominated by the finite-volume spatial error, so it must shrink with
  // self-convergence order at least one under (h, dt) refinement
  CoefficientSet cs = cubic_set();
  const double T = 0.01;

  auto discrepancy = [&](int n) {
    Grid g = make_grid(1, n);
    InitialData init;
    init.kind = "cosine";
    init.mean = 1.0;
    init.amplitude = 0.5;
    State rho0 = make_initial(g, init);
    int steps = 160 * (n / 32) * (n / 32);  // keeps dt just under the CFL bound
    double dt = T / steps;
    NoisePath path = quiet_path(dt, steps);
    SolveOptions opt;
    opt.scheme = "explicit";
    Trajectory fv = solve(rho0, 0.0, T, cs, path, opt);
    Trajectory sp = solve_galerkin(rho0, T, cs, path, n / 4);
    return l1_distance(fv.final_state, sp.final_state);
  };

  double coarse = discrepancy(32);
  double fine = discrepancy(64);
  CHECK(fine < coarse / 2.0);
  CHECK(coarse < 0.05);
}

TEST_CASE("identity diffusion conserves spectral mass through noise") {
  Grid g = make_grid(1, 64);
  NoiseBasis basis = build_basis(1, 4, "flat", 1.0, 0.0);
  PresetParams p;
  p.epsilon = 0.05;
  p.F1 = eval_constants(basis).F1;
  p.sigma_linear = 0.5;
  CoefficientSet cs = preset("heat", p);

  InitialData init;
  init.kind = "cosine";
  init.mean = 1.0;
  init.amplitude = 0.4;
  const double dt = 1e-4;
  NoisePath path = sample_path(basis, dt, 200 * dt, 99);
  SolveOptions opt;
  opt.save_every = 1;
  Trajectory traj = solve_galerkin(make_initial(g, init), 200 * dt, cs, path, 8, opt);

  double m0 = traj.series.mass.front();
  for (double m : traj.series.mass) CHECK(std::abs(m - m0) < 1e-12 * std::abs(m0));
}

TEST_CASE("constant-field noise cancels and leaves the deterministic flow") {
  // a single constant mode has zero divergence, so the stochastic run must
  // match the noise-free one
  Grid g = make_grid(1, 32);
  CoefficientSet cs;
  cs.phi = [](double x) { return x; };
  cs.dphi = [](double) { return 1.0; };
  cs.d2phi = [](double) { return 0.0; };
  cs.phi_is_identity = true;
  cs.phi_id_plus_lip = true;
  cs.sigma = [](double) { return 1.0; };
  cs.dsigma = [](double) { return 0.0; };
  cs.d2sigma = [](double) { return 0.0; };
  cs.epsilon = 0.1;

  InitialData init;
  init.kind = "cosine";
  init.mean = 1.0;
  init.amplitude = 0.5;
  State rho0 = make_initial(g, init);

  const double dt = 1e-4;
  const int steps = 200;
  NoiseBasis constant = build_basis(1, 0, "flat", 1.0, 0.0);
  NoisePath path = sample_path(constant, dt, steps * dt, 12);

  Trajectory noisy = solve_galerkin(rho0, steps * dt, cs, path, 5);
  CoefficientSet quiet = cs;
  quiet.epsilon = 0.0;
  Trajectory calm = solve_galerkin(rho0, steps * dt, quiet, path, 5);
  CHECK(max_distance(noisy.final_state, calm.final_state) < 1e-10);

  // the finite-volume scheme cancels the constant field bitwise at the faces
  Trajectory fv_noisy = solve(rho0, 0.0, steps * dt, cs, path);
  Trajectory fv_calm = solve(rho0, 0.0, steps * dt, quiet, path);
  CHECK(std::equal(fv_noisy.final_state.rho.begin(), fv_noisy.final_state.rho.end(),
                   fv_calm.final_state.rho.begin()));
}

TEST_CASE("identical spectral inputs give bitwise identical results") {
  Grid g = make_grid(1, 32);
  NoiseBasis basis = build_basis(1, 3, "flat", 1.0, 0.0);
  PresetParams p;
  p.epsilon = 0.05;
  p.F1 = eval_constants(basis).F1;
  CoefficientSet cs = preset("dean_kawasaki", p);

  InitialData init;
  init.kind = "random_smooth";
  init.amplitude = 0.4;
  init.seed = 31;
  State rho0 = make_initial(g, init);
  const double dt = 1e-4;
  NoisePath path = sample_path(basis, dt, 100 * dt, 6);

  Trajectory a = solve_galerkin(rho0, 100 * dt, cs, path, 6);
  Trajectory b = solve_galerkin(rho0, 100 * dt, cs, path, 6);
  CHECK(std::equal(a.final_state.rho.begin(), a.final_state.rho.end(),
                   b.final_state.rho.begin()));
}

TEST_CASE("spectral solver rejects invalid setups") {
  Grid g = make_grid(1, 32);
  State rho0 = make_initial(g, {});
  NoisePath path = quiet_path(1e-3, 8);
  CoefficientSet heat = preset("heat", {});

  CHECK_THROWS_AS(solve_galerkin(rho0, 4e-3, heat, path, 16), error);  // Nyquist cosine
  CHECK_THROWS_AS(solve_galerkin(rho0, 4e-3, heat, path, 0), error);
  Grid g2 = make_grid(2, 16);
  State rho2 = make_initial(g2, {});
  CHECK_THROWS_AS(solve_galerkin(rho2, 4e-3, heat, path, 4), error);

  // a decreasing Phi cannot be inverted
  CoefficientSet bad;
  bad.phi = [](double x) { return x - x * x * x; };
  bad.dphi = [](double x) { return 1.0 - 3.0 * x * x; };
  bad.d2phi = [](double x) { return -6.0 * x; };
  State big = make_state(g, [](double, double) { return 1.4; });
  CHECK_THROWS_AS(solve_galerkin(big, 4e-3, bad, path, 4), error);
}
