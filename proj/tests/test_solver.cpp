// finite-volume integrator checks against closed-form discrete solutions,
// conservation/positivity invariants, and restart/determinism guarantees
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "spde/coefficients.hpp"
#include "spde/grid.hpp"
#include "spde/noise.hpp"
#include "spde/solver.hpp"

using namespace spde;

namespace {

constexpr double kTau = 6.283185307179586476925287;

// eigenvalue of the 1-d three-point Laplacian for wavenumber k on n cells
double mu_discrete(int k, int n) {
  double h = 1.0 / n;
  return (2.0 - 2.0 * std::cos(kTau * k * h)) / (h * h);
}

// path with a trivial basis, used where only the time step matters
NoisePath quiet_path(int dim, double dt, int steps = 8) {
  return sample_path(build_basis(dim, 0, "flat", 1.0, 0.0), dt, steps * dt, 11);
}

CoefficientSet dk_set(double eps, const NoiseBasis& basis) {
  PresetParams p;
  p.epsilon = eps;
  p.F1 = eval_constants(basis).F1;
  return preset("dean_kawasaki", p);
}

double rel_mass_drift(const Trajectory& traj) {
  double m0 = traj.series.mass.front(), worst = 0.0;
  for (double m : traj.series.mass) worst = std::max(worst, std::abs(m - m0));
  return worst / std::abs(m0);
}

}  // namespace

TEST_CASE("semi-implicit heat flow matches the exact discrete decay") {
  Grid g = make_grid(1, 64);
  InitialData init;
  init.kind = "cosine";
  init.mean = 1.0;
  init.amplitude = 0.5;
  State rho0 = make_initial(g, init);

  const double dt = 1e-4;
  const int steps = 500;
  SolveOptions opt;
  opt.scheme = "semi_implicit";
  Trajectory traj = solve(rho0, 0.0, steps * dt, preset("heat", {}), quiet_path(1, dt, steps), opt);

  CHECK(traj.scheme_used == "semi_implicit");
  CHECK(traj.implicit_weight == doctest::Approx(1.0));
  CHECK(traj.limiter_hits == 0);
  CHECK(traj.mass_repair_max < 1e-13);

  // sampled cosine is an eigenvector of the discrete solve, so the backward
  // Euler amplification is exact per step
  double r = std::pow(1.0 / (1.0 + dt * mu_discrete(1, g.n)), steps);
  double worst = 0.0;
  for (int i = 0; i < g.n; ++i) {
    double x = (i + 0.5) * g.h;
    worst = std::max(worst, std::abs(traj.final_state.rho[i] - (1.0 + 0.5 * r * std::cos(kTau * x))));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("explicit heat flow matches the exact discrete decay") {
  Grid g = make_grid(1, 64);
  InitialData init;
  init.kind = "cosine";
  init.mean = 1.0;
  init.amplitude = 0.5;
  State rho0 = make_initial(g, init);

  const double dt = 1e-4;  // under the h^2/2 stability bound for n = 64
  const int steps = 400;
  SolveOptions opt;
  opt.scheme = "explicit";
  Trajectory traj = solve(rho0, 0.0, steps * dt, preset("heat", {}), quiet_path(1, dt, steps), opt);

  CHECK(traj.scheme_used == "explicit");
  double r = std::pow(1.0 - dt * mu_discrete(1, g.n), steps);
  double worst = 0.0;
  for (int i = 0; i < g.n; ++i) {
    double x = (i + 0.5) * g.h;
    worst = std::max(worst, std::abs(traj.final_state.rho[i] - (1.0 + 0.5 * r * std::cos(kTau * x))));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("explicit scheme refuses a step beyond the diffusion stability bound") {
  Grid g = make_grid(1, 64);
  State rho0 = make_initial(g, {});
  const double dt = 0.6 * g.h * g.h;  // above h^2 / (2 max Phi')
  SolveOptions opt;
  opt.scheme = "explicit";
  try {
    solve(rho0, 0.0, 4 * dt, preset("heat", {}), quiet_path(1, dt), opt);
    FAIL("unstable explicit step was accepted");
  } catch (const error& e) {
    CHECK(std::string(e.what()).find("stability") != std::string::npos);
  }
}

TEST_CASE("conservative noise keeps mass exact and the state nonnegative") {
  Grid g = make_grid(1, 64);
  NoiseBasis basis = build_basis(1, 8, "flat", 1.0, 0.0);
  CoefficientSet cs = dk_set(0.1, basis);

  const double dt = 0.5 * g.h * g.h;
  NoisePath path = sample_path(basis, dt, 400 * dt, 2024);

  InitialData init;
  init.kind = "cosine";
  init.mean = 1.0;
  init.amplitude = 0.4;
  SolveOptions opt;
  opt.save_every = 1;
  Trajectory traj = solve(make_initial(g, init), 0.0, 400 * dt, cs, path, opt);

  CHECK(rel_mass_drift(traj) < 1e-12);
  CHECK(mass_balance_residual(traj) < 1e-12 * traj.series.mass.front());
  for (double m : traj.series.min_rho) CHECK(m >= 0.0);
  for (double m : traj.series.max_rho) CHECK(m < 10.0);
  CHECK(traj.scheme_used == "semi_implicit");
  CHECK(traj.implicit_weight >= 1.0);
}

TEST_CASE("vacuum-touching data stays nonnegative under strong noise") {
  Grid g = make_grid(1, 64);
  NoiseBasis basis = build_basis(1, 8, "flat", 1.0, 0.0);
  CoefficientSet cs = dk_set(0.1, basis);

  // initial density hits zero at the trough
  InitialData init;
  init.kind = "cosine";
  init.mean = 0.5;
  init.amplitude = 0.5;
  const double dt = 0.25 * g.h * g.h;
  NoisePath path = sample_path(basis, dt, 2000 * dt, 77);
  SolveOptions opt;
  opt.save_every = 1;
  Trajectory traj = solve(make_initial(g, init), 0.0, 2000 * dt, cs, path, opt);

  for (double m : traj.series.min_rho) CHECK(m >= 0.0);
  CHECK(rel_mass_drift(traj) < 1e-12);
  MESSAGE("limiter hits over 2000 vacuum-adjacent steps: ", traj.limiter_hits);
}

TEST_CASE("identical inputs give bitwise identical trajectories") {
  Grid g = make_grid(1, 32);
  NoiseBasis basis = build_basis(1, 4, "flat", 1.0, 0.0);
  CoefficientSet cs = dk_set(0.05, basis);
  const double dt = 0.5 * g.h * g.h;
  NoisePath path = sample_path(basis, dt, 200 * dt, 5);

  InitialData init;
  init.kind = "random_smooth";
  init.amplitude = 0.5;
  init.seed = 9;
  State rho0 = make_initial(g, init);

  Trajectory a = solve(rho0, 0.0, 200 * dt, cs, path);
  Trajectory b = solve(rho0, 0.0, 200 * dt, cs, path);
  CHECK(std::equal(a.final_state.rho.begin(), a.final_state.rho.end(), b.final_state.rho.begin()));
  CHECK(std::equal(a.series.mass.begin(), a.series.mass.end(), b.series.mass.begin()));

  // a different path seed must actually change the outcome
  NoisePath other = sample_path(basis, dt, 200 * dt, 6);
  Trajectory c = solve(rho0, 0.0, 200 * dt, cs, other);
  CHECK(l1_distance(a.final_state, c.final_state) > 0.0);
}

TEST_CASE("a two-leg run over the same path matches a single run bitwise") {
  Grid g = make_grid(1, 32);
  NoiseBasis basis = build_basis(1, 6, "flat", 1.0, 0.0);
  CoefficientSet cs = dk_set(0.1, basis);
  const double dt = 0.5 * g.h * g.h;
  NoisePath path = sample_path(basis, dt, 100 * dt, 314);

  InitialData init;
  init.kind = "cosine";
  init.mean = 1.0;
  init.amplitude = 0.3;
  State rho0 = make_initial(g, init);

  Trajectory whole = solve(rho0, 0.0, 100 * dt, cs, path);
  Trajectory leg1 = solve(rho0, 0.0, 60 * dt, cs, path);
  Trajectory leg2 = solve(leg1.final_state, 60 * dt, 100 * dt, cs, path);

  REQUIRE(whole.final_state.rho.size() == leg2.final_state.rho.size());
  CHECK(std::equal(whole.final_state.rho.begin(), whole.final_state.rho.end(),
                   leg2.final_state.rho.begin()));
}

TEST_CASE("single step agrees with a one-step solve") {
  Grid g = make_grid(1, 32);
  NoiseBasis basis = build_basis(1, 4, "flat", 1.0, 0.0);
  CoefficientSet cs = dk_set(0.05, basis);
  const double dt = 0.5 * g.h * g.h;
  NoisePath path = sample_path(basis, dt, 8 * dt, 21);

  InitialData init;
  init.kind = "bump";
  init.mean = 1.0;
  init.amplitude = 1.0;
  State rho0 = make_initial(g, init);

  State one = step(rho0, cs, path, 0);
  Trajectory traj = solve(rho0, 0.0, dt, cs, path);
  CHECK(std::equal(one.rho.begin(), one.rho.end(), traj.final_state.rho.begin()));
  CHECK(one.time == doctest::Approx(dt));
}

TEST_CASE("two dimensional heat flow matches the exact discrete decay") {
  Grid g = make_grid(2, 32);
  State rho0 = make_state(g, [](double x, double y) {
    return 1.0 + 0.5 * std::cos(kTau * x) * std::cos(kTau * y);
  });

  const double dt = 1e-3;
  const int steps = 200;
  Trajectory traj = solve(rho0, 0.0, steps * dt, preset("heat", {}), quiet_path(2, dt, steps));

  // the product of axis cosines is an eigenvector of the five-point solve
  double r = std::pow(1.0 / (1.0 + 2.0 * dt * mu_discrete(1, g.n)), steps);
  double worst = 0.0;
  for (int j = 0; j < g.n; ++j)
    for (int i = 0; i < g.n; ++i) {
      double x = (i + 0.5) * g.h, y = (j + 0.5) * g.h;
      double want = 1.0 + 0.5 * r * std::cos(kTau * x) * std::cos(kTau * y);
      worst = std::max(worst, std::abs(traj.final_state.rho[j * g.n + i] - want));
    }
  CHECK(worst < 1e-10);
}

TEST_CASE("two dimensional noise run conserves mass and positivity") {
  Grid g = make_grid(2, 32);
  NoiseBasis basis = build_basis(2, 1, "flat", 1.0, 0.0);
  CoefficientSet cs = dk_set(0.05, basis);
  const double dt = 0.25 * g.h * g.h;
  NoisePath path = sample_path(basis, dt, 100 * dt, 404);

  InitialData init;
  init.kind = "cosine";
  init.mean = 1.0;
  init.amplitude = 0.4;
  SolveOptions opt;
  opt.save_every = 1;
  Trajectory traj = solve(make_initial(g, init), 0.0, 100 * dt, cs, path, opt);

  CHECK(rel_mass_drift(traj) < 1e-12);
  for (double m : traj.series.min_rho) CHECK(m >= 0.0);
}

TEST_CASE("reaction bookkeeping closes the mass balance to quadrature order") {
  Grid g = make_grid(1, 64);
  PresetParams p;
  p.kappa = 1.0;
  CoefficientSet cs = preset("sine_gordon", p);

  InitialData init;
  init.kind = "cosine";
  init.mean = 1.0;
  init.amplitude = 0.5;
  State rho0 = make_initial(g, init);

  const double dt = 1e-3;
  SolveOptions fine;
  fine.save_every = 1;
  Trajectory traj = solve(rho0, 0.0, 500 * dt, cs, quiet_path(1, dt, 500), fine);

  // sin(rho) > 0 on this range, so reaction removes mass
  CHECK(traj.series.mass.back() < traj.series.mass.front());

  // with every step saved, the trapezoid audit against the explicit Euler
  // update telescopes to (dt/2) max_k |f_k - f_0|
  double swing = 0.0;
  for (double fr : traj.series.f_rate)
    swing = std::max(swing, std::abs(fr - traj.series.f_rate.front()));
  CHECK(mass_balance_residual(traj) == doctest::Approx(0.5 * dt * swing).epsilon(1e-6));
  CHECK(mass_balance_residual(traj) < dt);

  // a coarse save stride keeps the residual at quadrature accuracy of the
  // saved grid, not of the step
  SolveOptions coarse;
  coarse.save_every = 25;
  Trajectory traj2 = solve(rho0, 0.0, 500 * dt, cs, quiet_path(1, dt, 500), coarse);
  CHECK(mass_balance_residual(traj2) < 1e-2);
  CHECK(mass_balance_residual(traj2) >= mass_balance_residual(traj) * 0.1);
}

TEST_CASE("quadratic advection transports mass conservatively") {
  Grid g = make_grid(1, 64);
  PresetParams p;
  p.nu_quadratic = 1.0;
  CoefficientSet cs = preset("heat", p);

  InitialData init;
  init.kind = "cosine";
  init.mean = 1.0;
  init.amplitude = 0.5;
  const double dt = 1e-4;
  SolveOptions opt;
  opt.save_every = 1;
  Trajectory traj = solve(make_initial(g, init), 0.0, 300 * dt, cs, quiet_path(1, dt, 300), opt);

  CHECK(rel_mass_drift(traj) < 1e-12);
  for (double m : traj.series.min_rho) CHECK(m >= 0.0);
  CHECK(traj.series.nu_l1.back() > 0.0);
}

TEST_CASE("advection faster than a cell per step is refused") {
  Grid g = make_grid(1, 64);
  PresetParams p;
  p.nu_quadratic = 1e4;
  CoefficientSet cs = preset("heat", p);
  const double dt = 1e-3;
  try {
    solve(make_initial(g, {}), 0.0, 4 * dt, cs, quiet_path(1, dt));
    FAIL("transport CFL violation was accepted");
  } catch (const error& e) {
    CHECK(std::string(e.what()).find("CFL") != std::string::npos);
  }
}

TEST_CASE("invalid solver inputs are refused") {
  Grid g = make_grid(1, 32);
  CoefficientSet heat = preset("heat", {});
  NoisePath path = quiet_path(1, 1e-3);

  State bad = make_initial(g, {});
  bad.rho[3] = -0.5;
  CHECK_THROWS_AS(solve(bad, 0.0, 1e-2, heat, path), error);

  State rho0 = make_initial(g, {});
  CHECK_THROWS_AS(solve(rho0, 1e-2, 1e-2, heat, path), error);       // empty window
  CHECK_THROWS_AS(solve(rho0, 0.5e-3, 1e-2, heat, path), error);     // s off the step grid
  NoisePath path2d = quiet_path(2, 1e-3);
  CHECK_THROWS_AS(solve(rho0, 0.0, 1e-2, heat, path2d), error);      // dimension mismatch

  PresetParams p;
  p.kappa = 1.0;
  CHECK_THROWS_AS(solve(rho0, 0.0, 3.0, preset("sine_gordon", p), quiet_path(1, 1.5)), error);

  // the semi-implicit splitting needs Phi = identity + bounded remainder
  CoefficientSet cubic;
  cubic.phi = [](double x) { return x * x * x; };
  cubic.dphi = [](double x) { return 3.0 * x * x; };
  cubic.d2phi = [](double x) { return 6.0 * x; };
  SolveOptions opt;
  opt.scheme = "semi_implicit";
  CHECK_THROWS_AS(solve(rho0, 0.0, 1e-2, cubic, path, opt), error);

  // the nonlocal drift is a one dimensional feature
  PresetParams pb;
  pb.b_drift = 0.5;
  Grid g2 = make_grid(2, 16);
  State rho2 = make_initial(g2, {});
  CHECK_THROWS_AS(solve(rho2, 0.0, 1e-2, preset("heat", pb), path2d), error);
}

TEST_CASE("nonlocal drift runs conservatively in one dimension") {
  Grid g = make_grid(1, 64);
  PresetParams p;
  p.b_drift = 0.5;
  CoefficientSet cs = preset("heat", p);

  InitialData init;
  init.kind = "cosine";
  init.mean = 1.0;
  init.amplitude = 0.5;
  const double dt = 1e-4;
  SolveOptions opt;
  opt.save_every = 1;
  Trajectory traj = solve(make_initial(g, init), 0.0, 500 * dt, cs, quiet_path(1, dt, 500), opt);

  CHECK(rel_mass_drift(traj) < 1e-12);
  for (double m : traj.series.min_rho) CHECK(m >= 0.0);
}

TEST_CASE("saved series spans the run and heat gradients decay monotonically") {
  Grid g = make_grid(1, 64);
  InitialData init;
  init.kind = "cosine2";
  init.mean = 1.0;
  init.amplitude = 0.3;
  State rho0 = make_initial(g, init);

  const double dt = 1e-4;
  const int steps = 2000;
  Trajectory traj = solve(rho0, 0.0, steps * dt, preset("heat", {}), quiet_path(1, dt, steps));

  const SaveSeries& s = traj.series;
  REQUIRE(s.t.size() >= 3);
  CHECK(s.t.front() == doctest::Approx(0.0));
  CHECK(s.t.back() == doctest::Approx(steps * dt));
  for (std::size_t i = 1; i < s.t.size(); ++i) CHECK(s.t[i] > s.t[i - 1]);
  CHECK(s.mass.size() == s.t.size());
  CHECK(s.psi1.size() == s.t.size());
  CHECK(s.grad_phi_sq.size() == s.t.size());

  // pure heat flow dissipates the Dirichlet energy and the entropy
  for (std::size_t i = 1; i < s.t.size(); ++i) {
    CHECK(s.grad_phi_sq[i] <= s.grad_phi_sq[i - 1] + 1e-12);
    CHECK(s.psi1[i] <= s.psi1[i - 1] + 1e-12);
  }
  std::vector<double> gf = gradient_functional(traj, 2.0);
  REQUIRE(gf.size() == s.t.size());
  for (double v : gf) CHECK(v >= 1.0);  // (g + 1)^{p/2} with g >= 0
  CHECK_THROWS_AS(gradient_functional(traj, 1.0), error);

  SolveOptions keep;
  keep.store_states = true;
  keep.save_every = 500;
  Trajectory traj2 = solve(rho0, 0.0, steps * dt, preset("heat", {}), quiet_path(1, dt, steps), keep);
  REQUIRE(traj2.states.size() == traj2.series.t.size());
  CHECK(l1_distance(traj2.states.front(), rho0) == 0.0);
  CHECK(l1_distance(traj2.states.back(), traj.final_state) == 0.0);
}
