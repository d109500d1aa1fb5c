// coupled-flow checks: contraction envelopes, exact restart and shift
// identities, and the initial-time modulus fit
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "spde/coefficients.hpp"
#include "spde/flow.hpp"
#include "spde/grid.hpp"
#include "spde/noise.hpp"

using namespace spde;

namespace {

CoefficientSet dk_set(double eps, const NoiseBasis& basis) {
  PresetParams p;
  p.epsilon = eps;
  p.F1 = eval_constants(basis).F1;
  return preset("dean_kawasaki", p);
}

State cosine_state(const Grid& g, double mean, double amp, int wave) {
  InitialData init;
  init.kind = "cosine";
  init.mean = mean;
  init.amplitude = amp;
  init.wave = wave;
  return make_initial(g, init);
}

}  // namespace

TEST_CASE("identical initial data stay identical along the coupling") {
  Grid g = make_grid(1, 64);
  NoiseBasis basis = build_basis(1, 8, "flat", 1.0, 0.0);
  CoefficientSet cs = dk_set(0.1, basis);
  const double dt = 0.5 * g.h * g.h;
  NoisePath path = sample_path(basis, dt, 256 * dt, 51);

  State rho0 = cosine_state(g, 1.0, 0.4, 1);
  CouplingReport rep = contraction_report(rho0, rho0, cs, path, 256 * dt);
  CHECK(rep.degenerate);
  CHECK(rep.violations == 0);
  for (double d : rep.distance) CHECK(d == 0.0);
}

TEST_CASE("without drift or reaction the coupled distance never expands") {
  Grid g = make_grid(1, 64);
  NoiseBasis basis = build_basis(1, 8, "flat", 1.0, 0.0);
  CoefficientSet cs = dk_set(0.1, basis);
  const double dt = 0.5 * g.h * g.h;
  const double T = 512 * dt;

  State a = cosine_state(g, 1.0, 0.3, 1);
  State b = cosine_state(g, 1.0, 0.25, 2);

  const double tol = 5e-3;
  for (std::uint64_t seed : {101u, 102u, 103u}) {
    NoisePath path = sample_path(basis, dt, T, seed);
    CouplingReport rep = contraction_report(a, b, cs, path, T, tol);
    CHECK(!rep.degenerate);
    CHECK(rep.violations == 0);
    CHECK(rep.max_ratio <= 1.0 + tol);
    // the envelope is flat here, so the series itself must be nonincreasing
    for (std::size_t k = 1; k < rep.distance.size(); ++k)
      CHECK(rep.distance[k] <= rep.distance[k - 1] * (1.0 + tol));
    CHECK(rep.bound.front() == doctest::Approx(rep.distance.front()));
  }
}

TEST_CASE("reaction growth stays inside the exponential envelope") {
  Grid g = make_grid(1, 64);
  PresetParams p;
  p.kappa = 1.0;
  CoefficientSet cs = preset("sine_gordon", p);
  REQUIRE(cs.f_lip == doctest::Approx(1.0));

  const double dt = 1e-4;
  const double T = 0.2;
  NoiseBasis trivial = build_basis(1, 0, "flat", 1.0, 0.0);
  NoisePath path = sample_path(trivial, dt, T, 1);

  State a = cosine_state(g, 1.0, 0.5, 1);
  State b = cosine_state(g, 1.2, 0.3, 2);
  CouplingReport rep = contraction_report(a, b, cs, path, T);
  CHECK(!rep.degenerate);
  CHECK(rep.violations == 0);
  CHECK(rep.max_ratio <= 1.0 + rep.tol);
  // envelope at the horizon is e^T d0
  CHECK(rep.bound.back() ==
        doctest::Approx(std::exp(T) * rep.distance.front()).epsilon(1e-12));
}

TEST_CASE("restarting mid-path reproduces the whole path exactly") {
  Grid g = make_grid(1, 48);
  NoiseBasis basis = build_basis(1, 6, "flat", 1.0, 0.0);
  CoefficientSet cs = dk_set(0.1, basis);
  const double dt = 0.25 * g.h * g.h;
  NoisePath path = sample_path(basis, dt, 640 * dt, 77);
  State rho0 = cosine_state(g, 1.0, 0.4, 1);

  double s = 64 * dt, s1 = 256 * dt, t = 640 * dt;
  CHECK(semiflow_residual(rho0, s, s, t, cs, path) == 0.0);
  CHECK(semiflow_residual(rho0, s, t, t, cs, path) == 0.0);
  CHECK(semiflow_residual(rho0, s, s1, t, cs, path) == 0.0);
  CHECK(semiflow_residual(rho0, 0.0, s1, t, cs, path) < 1e-12);

  CHECK_THROWS_AS(semiflow_residual(rho0, s1, s, t, cs, path), error);
  CHECK_THROWS_AS(semiflow_residual(rho0, s, 0.3 * dt, t, cs, path), error);
}

TEST_CASE("the wiener shift turns a delayed start into a fresh start") {
  Grid g = make_grid(1, 64);
  NoiseBasis basis = build_basis(1, 8, "flat", 1.0, 0.0);
  CoefficientSet cs = dk_set(0.1, basis);
  const double dt = 0.5 * g.h * g.h;  // 1/8192, so 0.25 and 0.5 align
  NoisePath path = sample_path(basis, dt, 0.75, 2718);
  State rho0 = cosine_state(g, 1.0, 0.4, 1);

  CHECK(cocycle_residual(rho0, 0.0, 0.25, cs, path) == 0.0);
  CHECK(cocycle_residual(rho0, 0.25, 0.0, cs, path) == 0.0);
  CHECK(cocycle_residual(rho0, 0.25, 0.5, cs, path) == 0.0);
  CHECK(cocycle_residual(rho0, 0.25, 0.5, cs, path) < 1e-12);
}

TEST_CASE("deterministic heat start-time modulus fits a first-order exponent") {
  Grid g = make_grid(1, 64);
  CoefficientSet cs = preset("heat", {});
  const double dt = 1e-4;
  NoisePath path = sample_path(build_basis(1, 0, "flat", 1.0, 0.0), dt, 0.1, 4);

  State rho0 = cosine_state(g, 1.0, 0.5, 1);
  // keep 4 pi^2 ds well below 1, where the heat semigroup difference
  // 1 - exp(-4 pi^2 ds) is still linear in ds
  std::vector<double> s_grid = {0.0, 0.001, 0.002, 0.004};
  ModulusReport rep = initial_time_modulus(rho0, s_grid, 0.1, cs, path);

  CHECK(rep.pairs.size() == 6);
  for (const ModulusPair& p : rep.pairs) CHECK(p.in_fit);
  CHECK(rep.eta_fit == doctest::Approx(1.0).epsilon(0.1));
  CHECK(rep.x_fit > 0.0);
}

TEST_CASE("duplicate start times are reported but excluded from the fit") {
  Grid g = make_grid(1, 64);
  CoefficientSet cs = preset("heat", {});
  const double dt = 1e-4;
  NoisePath path = sample_path(build_basis(1, 0, "flat", 1.0, 0.0), dt, 0.1, 4);
  State rho0 = cosine_state(g, 1.0, 0.5, 1);

  ModulusReport rep = initial_time_modulus(rho0, {0.0, 0.02, 0.02, 0.05}, 0.1, cs, path);
  int zero_pairs = 0;
  for (const ModulusPair& p : rep.pairs)
    if (p.ds == 0.0) {
      ++zero_pairs;
      CHECK(p.dist == 0.0);
      CHECK(!p.in_fit);
    }
  CHECK(zero_pairs == 1);
  CHECK(rep.eta_fit > 0.0);
}

TEST_CASE("noisy start-time modulus stays positive") {
  Grid g = make_grid(1, 48);
  NoiseBasis basis = build_basis(1, 6, "flat", 1.0, 0.0);
  CoefficientSet cs = dk_set(0.05, basis);
  const double dt = 0.25 * g.h * g.h;
  NoisePath path = sample_path(basis, dt, 1024 * dt, 909);
  State rho0 = cosine_state(g, 1.0, 0.4, 1);

  std::vector<double> s_grid = {0.0, 64 * dt, 192 * dt, 448 * dt};
  ModulusReport rep = initial_time_modulus(rho0, s_grid, 1024 * dt, cs, path);
  CHECK(rep.eta_fit > 0.0);
}

TEST_CASE("start-time modulus rejects bad grids") {
  Grid g = make_grid(1, 32);
  CoefficientSet cs = preset("heat", {});
  NoisePath path = sample_path(build_basis(1, 0, "flat", 1.0, 0.0), 1e-3, 0.1, 4);
  State rho0 = cosine_state(g, 1.0, 0.5, 1);

  CHECK_THROWS_AS(initial_time_modulus(rho0, {0.0, 0.01}, 0.1, cs, path), error);
  CHECK_THROWS_AS(initial_time_modulus(rho0, {0.0, 0.0105, 0.02}, 0.1, cs, path), error);
  CHECK_THROWS_AS(initial_time_modulus(rho0, {0.0, 0.01, 0.2}, 0.1, cs, path), error);
}
