// statistics kit checks with values frozen from independent computations
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "spde/stats.hpp"
#include "spde/util.hpp"

using namespace spde;

TEST_CASE("wilson interval reproduces reference values") {
  Interval a = wilson_interval(8, 10);
  CHECK(a.lo == doctest::Approx(0.49016247153664183).epsilon(1e-12));
  CHECK(a.hi == doctest::Approx(0.9433178485456247).epsilon(1e-12));
  CHECK(a.center == doctest::Approx(0.7167401600411333).epsilon(1e-12));

  Interval zero = wilson_interval(0, 20);
  CHECK(zero.lo == 0.0);
  CHECK(zero.hi == doctest::Approx(0.16112515805281938).epsilon(1e-12));

  Interval full = wilson_interval(20, 20);
  CHECK(full.lo == doctest::Approx(0.8388748419471806).epsilon(1e-12));
  CHECK(full.hi == 1.0);

  Interval small = wilson_interval(1, 7);
  CHECK(small.lo == doctest::Approx(0.02567962434474355).epsilon(1e-12));
  CHECK(small.hi == doctest::Approx(0.5131278292743189).epsilon(1e-12));

  CHECK_THROWS_AS(wilson_interval(5, 0), error);
  CHECK_THROWS_AS(wilson_interval(-1, 10), error);
  CHECK_THROWS_AS(wilson_interval(11, 10), error);
}

TEST_CASE("wilson interval always brackets the raw proportion") {
  for (int n : {3, 10, 50, 400})
    for (int s = 0; s <= n; s += std::max(1, n / 7)) {
      Interval w = wilson_interval(s, n);
      double p = double(s) / n;
      CHECK(w.lo <= p + 1e-12);
      CHECK(w.hi >= p - 1e-12);
      CHECK(w.lo >= 0.0);
      CHECK(w.hi <= 1.0);
    }
}

TEST_CASE("least squares recovers exact lines and reference fits") {
  LinearFit exact = linear_fit({0.0, 1.0, 2.0}, {1.0, 3.0, 5.0});
  CHECK(exact.slope == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(exact.intercept == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(exact.rss < 1e-24);

  // hand-checked normal equations: x = {0,1,2,3}, y = {0,1,1,2} give
  // slope 3/5, intercept 1/10, residuals {-0.1, 0.3, -0.3, 0.1}
  LinearFit f = linear_fit({0.0, 1.0, 2.0, 3.0}, {0.0, 1.0, 1.0, 2.0});
  CHECK(f.slope == doctest::Approx(0.6).epsilon(1e-14));
  CHECK(f.intercept == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(f.rss == doctest::Approx(0.2).epsilon(1e-12));

  CHECK_THROWS_AS(linear_fit({1.0}, {2.0}), error);
  CHECK_THROWS_AS(linear_fit({1.0, 1.0}, {2.0, 3.0}), error);
  CHECK_THROWS_AS(linear_fit({1.0, 2.0}, {2.0}), error);
}

TEST_CASE("bootstrap percentile interval behaves like a confidence interval") {
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / v.size();
  };

  std::vector<double> sample;
  for (int i = 0; i < 200; ++i) sample.push_back((i % 17) * 0.25 - 2.0);

  Interval ci = bootstrap_percentile(sample, mean, 1000, 42);
  CHECK(ci.lo <= ci.center);
  CHECK(ci.center <= ci.hi);
  CHECK(ci.hi - ci.lo > 0.0);
  CHECK(ci.hi - ci.lo < 1.0);

  // deterministic: repeated calls agree bitwise
  Interval again = bootstrap_percentile(sample, mean, 1000, 42);
  CHECK(ci.lo == again.lo);
  CHECK(ci.hi == again.hi);

  // a different seed moves the endpoints but not by much
  Interval moved = bootstrap_percentile(sample, mean, 1000, 43);
  CHECK(moved.lo != ci.lo);
  CHECK(std::abs(moved.lo - ci.lo) < 0.2);

  // constant samples collapse the interval to the point
  std::vector<double> flat(50, 3.25);
  Interval point = bootstrap_percentile(flat, mean, 200, 1);
  CHECK(point.lo == 3.25);
  CHECK(point.hi == 3.25);

  // quadrupling the sample size roughly halves the width
  std::vector<double> big;
  for (int i = 0; i < 800; ++i) big.push_back((i % 17) * 0.25 - 2.0);
  Interval tight = bootstrap_percentile(big, mean, 1000, 42);
  double shrink = (tight.hi - tight.lo) / (ci.hi - ci.lo);
  CHECK(shrink > 0.3);
  CHECK(shrink < 0.75);

  CHECK_THROWS_AS(bootstrap_percentile({}, mean, 100, 0), error);
}

TEST_CASE("pair bootstrap resamples points jointly") {
  // y = 2x exactly; every resample preserves the relation, so the slope
  // statistic has a zero-width bootstrap interval
  std::vector<double> x, y;
  for (int i = 0; i < 40; ++i) {
    x.push_back(0.1 * i);
    y.push_back(0.2 * i);
  }
  auto slope = [](const std::vector<double>& a, const std::vector<double>& b) {
    return linear_fit(a, b).slope;
  };
  Interval ci = bootstrap_pairs(x, y, slope, 300, 7);
  CHECK(ci.lo == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(ci.hi == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(ci.center == doctest::Approx(2.0).epsilon(1e-12));
}
