// noise module tests: basis enumeration, summability constants against
// independently summed oracles, increment statistics, and the reindexing
// contract for shifts and cutoff extension.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "spde/noise.hpp"

using namespace spde;

namespace {
const double kTau = 6.283185307179586476925287;

// oracle: direct pair summation, written independently of eval_constants
void oracle_sums(const NoiseBasis& b, double& F1, double& F3) {
  F1 = 0.0;
  F3 = 0.0;
  for (const NoiseMode& m : b.modes) {
    double k2 = double(m.k[0]) * m.k[0] + double(m.k[1]) * m.k[1];
    // each member contributes lambda^2 * 2 * (sin^2 or cos^2); a sin/cos pair
    // sums to 2 lambda^2, the k = 0 constant member alone gives 2 lambda^2
    if (m.k[0] == 0 && m.k[1] == 0) {
      F1 += 2.0 * m.lambda * m.lambda;
    } else {
      F1 += m.lambda * m.lambda;  // half of the pair total per member
    }
    F3 += m.lambda * m.lambda * kTau * kTau * k2 * ((m.k[0] == 0 && m.k[1] == 0) ? 2.0 : 1.0);
  }
}
}  // namespace

TEST_CASE("single constant mode: trivial constants") {
  NoiseBasis b = build_basis(1, 0, "flat", 1.0);
  REQUIRE(b.n_modes() == 1);
  CHECK(!b.modes[0].is_sin);
  NoiseConstants c = eval_constants(b);
  CHECK(c.F1 == doctest::Approx(2.0).epsilon(1e-13));
  CHECK(c.F3 == doctest::Approx(0.0).epsilon(1e-13));
  CHECK(c.F4 == 0.0);
  CHECK(c.stationarity_deviation < 1e-12);
}

TEST_CASE("flat cutoff-1 family: frozen constants") {
  NoiseBasis b = build_basis(1, 1, "flat", 1.0);
  REQUIRE(b.n_modes() == 3);  // constant, sin(2 pi x), cos(2 pi x)
  CHECK(b.modes[1].is_sin);
  CHECK(!b.modes[2].is_sin);
  NoiseConstants c = eval_constants(b);
  // frozen: F1 = 2 + 2, F3 = 2 (2 pi)^2, F4 = 4 (2 pi)^4
  CHECK(c.F1 == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(c.F3 == doctest::Approx(78.95683520871486895).epsilon(1e-12));
  CHECK(c.F4 == doctest::Approx(6234.181826176158).epsilon(1e-12));
  CHECK(c.stationarity_deviation < 1e-12);
}

TEST_CASE("power-law family matches direct summation oracle") {
  NoiseBasis b = build_basis(1, 8, "power_law", 1.0, 2.0);
  REQUIRE(b.n_modes() == 17);
  double F1o, F3o;
  oracle_sums(b, F1o, F3o);
  NoiseConstants c = eval_constants(b);
  CHECK(c.F1 == doctest::Approx(F1o).epsilon(1e-12));
  CHECK(c.F3 == doctest::Approx(F3o).epsilon(1e-12));
  CHECK(c.stationarity_deviation < 1e-12);
  // lambda actually decays as advertised
  CHECK(b.modes[1].lambda == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(b.modes.back().lambda == doctest::Approx(1.0 / 65.0).epsilon(1e-15));
}

TEST_CASE("two-dimensional half-lattice enumeration and constants") {
  NoiseBasis b = build_basis(2, 1, "flat", 1.0);
  // k = (0,0) single member; (0,1), (1,-1), (1,0), (1,1) pairs
  REQUIRE(b.n_modes() == 9);
  double F1o, F3o;
  oracle_sums(b, F1o, F3o);
  CHECK(F1o == doctest::Approx(10.0));
  NoiseConstants c = eval_constants(b);
  CHECK(c.F1 == doctest::Approx(F1o).epsilon(1e-12));
  CHECK(c.F3 == doctest::Approx(F3o).epsilon(1e-12));
  CHECK(c.stationarity_deviation < 1e-11);
  // no duplicate wavevector/phase combinations
  for (int i = 0; i < b.n_modes(); ++i)
    for (int j = i + 1; j < b.n_modes(); ++j) {
      bool same = b.modes[i].k[0] == b.modes[j].k[0] && b.modes[i].k[1] == b.modes[j].k[1] &&
                  b.modes[i].is_sin == b.modes[j].is_sin;
      CHECK(!same);
    }
}

TEST_CASE("mode_eval spot values") {
  NoiseMode sin1{{1, 0}, true, 1.0};
  NoiseMode cos0{{0, 0}, false, 1.0};
  double x = 0.25;
  CHECK(mode_eval(sin1, 1, &x) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
  CHECK(mode_eval(cos0, 1, &x) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
  double g;
  mode_grad(sin1, 1, &x, &g);
  CHECK(g == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("increments are N(0, dt) with independent streams") {
  NoiseBasis b = build_basis(1, 2, "flat", 1.0);
  double dt = 0.01;
  NoisePath p = sample_path(b, dt, 10.0, 123);
  const int N = 100000;
  std::vector<double> a(N), c(N);
  for (int n = 0; n < N; ++n) {
    a[n] = p.increment(1, 0, n);
    c[n] = p.increment(2, 0, n);
  }
  double ma = 0, mc = 0;
  for (int n = 0; n < N; ++n) {
    ma += a[n];
    mc += c[n];
  }
  ma /= N;
  mc /= N;
  double va = 0, vc = 0, cov = 0, lag1 = 0;
  for (int n = 0; n < N; ++n) {
    va += a[n] * a[n];
    vc += c[n] * c[n];
    cov += a[n] * c[n];
    if (n) lag1 += a[n] * a[n - 1];
  }
  va /= N;
  vc /= N;
  cov /= N;
  lag1 /= (N - 1);
  double sd = std::sqrt(dt);
  CHECK(std::abs(ma) < 3.0 * sd / std::sqrt(double(N)));
  CHECK(std::abs(mc) < 3.0 * sd / std::sqrt(double(N)));
  CHECK(std::abs(va - dt) < 3.0 * dt * std::sqrt(2.0 / N));
  CHECK(std::abs(vc - dt) < 3.0 * dt * std::sqrt(2.0 / N));
  CHECK(std::abs(cov) < 3.0 * dt / std::sqrt(double(N)));
  CHECK(std::abs(lag1) < 3.0 * dt / std::sqrt(double(N)));
}

TEST_CASE("same seed reproduces bitwise, different seed differs") {
  NoiseBasis b = build_basis(1, 3, "flat", 0.7);
  NoisePath p1 = sample_path(b, 1e-4, 0.1, 42);
  NoisePath p2 = sample_path(b, 1e-4, 0.1, 42);
  NoisePath p3 = sample_path(b, 1e-4, 0.1, 43);
  bool all_eq = true, any_diff = false;
  for (int j = 0; j < b.n_modes(); ++j)
    for (int n = 0; n < 1000; ++n) {
      all_eq = all_eq && (p1.increment(j, 0, n) == p2.increment(j, 0, n));
      any_diff = any_diff || (p1.increment(j, 0, n) != p3.increment(j, 0, n));
    }
  CHECK(all_eq);
  CHECK(any_diff);
}

TEST_CASE("shift is pure reindexing, exact to the bit") {
  NoiseBasis b = build_basis(1, 2, "flat", 1.0);
  double dt = 0.001;
  NoisePath p = sample_path(b, dt, 1.0, 7);
  NoisePath q = shift_path(p, 17 * dt);
  for (int j = 0; j < b.n_modes(); ++j)
    for (int n = -5; n < 50; ++n) CHECK(q.increment(j, 0, n) == p.increment(j, 0, n + 17));
  // composition of shifts
  NoisePath r = shift_path(q, 5 * dt);
  for (int n = 0; n < 20; ++n) CHECK(r.increment(0, 0, n) == p.increment(0, 0, n + 22));
  // negative shift undoes
  NoisePath back = shift_path(q, -17 * dt);
  for (int n = 0; n < 20; ++n) CHECK(back.increment(1, 0, n) == p.increment(1, 0, n));
  // misaligned shift is refused
  CHECK_THROWS_AS(shift_path(p, 7.5 * dt), error);
}

TEST_CASE("cutoff extension leaves existing mode streams untouched") {
  NoiseBasis small = build_basis(1, 2, "flat", 1.0);
  NoiseBasis big = build_basis(1, 6, "flat", 1.0);
  NoisePath ps = sample_path(small, 0.01, 1.0, 99);
  NoisePath pb = sample_path(big, 0.01, 1.0, 99);
  for (int j = 0; j < small.n_modes(); ++j) {
    CHECK(small.modes[j].k[0] == big.modes[j].k[0]);
    CHECK(small.modes[j].is_sin == big.modes[j].is_sin);
    for (int n = 0; n < 200; ++n) CHECK(ps.increment(j, 0, n) == pb.increment(j, 0, n));
  }
}

TEST_CASE("two-dimensional paths have independent component streams") {
  NoiseBasis b = build_basis(2, 1, "flat", 1.0);
  NoisePath p = sample_path(b, 0.01, 1.0, 5);
  int N = 20000;
  double cov = 0.0;
  bool distinct = false;
  for (int n = 0; n < N; ++n) {
    double u = p.increment(3, 0, n), v = p.increment(3, 1, n);
    cov += u * v;
    distinct = distinct || (u != v);
  }
  CHECK(distinct);
  CHECK(std::abs(cov / N) < 3.0 * 0.01 / std::sqrt(double(N)));
}

TEST_CASE("horizon and alignment validation") {
  NoiseBasis b = build_basis(1, 1, "flat", 1.0);
  CHECK_THROWS_AS(sample_path(b, 0.01, 0.0305, 1), error);  // T not a step multiple
  CHECK_THROWS_AS(sample_path(b, -0.01, 1.0, 1), error);
  NoisePath p = sample_path(b, 0.01, 1.0, 1);
  CHECK(p.n_steps() == 100);
  // beyond-horizon reads extend from the same substream (lazy), still defined
  double far = p.increment(0, 0, 100000);
  CHECK(std::isfinite(far));
}
