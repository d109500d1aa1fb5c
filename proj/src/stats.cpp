#include "spde/stats.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spde/rng.hpp"
#include "spde/util.hpp"

namespace spde {

namespace {

// linear-interpolated order statistic of an ascending vector
double quantile_sorted(const std::vector<double>& v, double q) {
  if (v.empty()) fail("quantile of an empty vector");
  double pos = q * (v.size() - 1);
  std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= v.size()) return v.back();
  double w = pos - lo;
  return v[lo] * (1.0 - w) + v[lo + 1] * w;
}

Interval percentile_interval(std::vector<double> stats, double coverage, double center) {
  std::sort(stats.begin(), stats.end());
  double tail = 0.5 * (1.0 - coverage);
  Interval out;
  out.lo = quantile_sorted(stats, tail);
  out.hi = quantile_sorted(stats, 1.0 - tail);
  out.center = center;
  return out;
}

}  // namespace

double quantile(std::vector<double> values, double q) {
  if (q < 0.0 || q > 1.0) fail("quantile: q outside [0, 1]");
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, q);
}

Interval wilson_interval(std::int64_t successes, std::int64_t trials, double z) {
  if (trials < 1) fail("wilson_interval: need at least one trial");
  if (successes < 0 || successes > trials)
    fail("wilson_interval: successes outside [0, trials]");
  double n = static_cast<double>(trials);
  double p = static_cast<double>(successes) / n;
  double z2 = z * z;
  double denom = 1.0 + z2 / n;
  double center = (p + z2 / (2.0 * n)) / denom;
  double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  Interval out;
  out.center = center;
  out.lo = std::max(0.0, center - half);
  out.hi = std::min(1.0, center + half);
  return out;
}

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) fail("linear_fit: length mismatch");
  std::size_t n = x.size();
  if (n < 2) fail("linear_fit: need at least two points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) fail("linear_fit: x values are all equal");
  LinearFit out;
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;
  for (std::size_t i = 0; i < n; ++i) {
    double r = y[i] - (out.intercept + out.slope * x[i]);
    out.rss += r * r;
  }
  return out;
}

Interval bootstrap_percentile(const std::vector<double>& sample,
                              const std::function<double(const std::vector<double>&)>& stat,
                              int resamples, std::uint64_t seed, double coverage) {
  if (sample.empty()) fail("bootstrap_percentile: empty sample");
  if (resamples < 2) fail("bootstrap_percentile: need at least two resamples");
  std::vector<double> stats(resamples);
  std::vector<double> draw(sample.size());
  CounterRng rng(seed, 0xb007);
  for (int r = 0; r < resamples; ++r) {
    for (std::size_t i = 0; i < sample.size(); ++i)
      draw[i] = sample[rng.below(sample.size())];
    stats[r] = stat(draw);
  }
  return percentile_interval(std::move(stats), coverage, stat(sample));
}

Interval bootstrap_pairs(const std::vector<double>& x, const std::vector<double>& y,
                         const std::function<double(const std::vector<double>&,
                                                    const std::vector<double>&)>& stat,
                         int resamples, std::uint64_t seed, double coverage) {
  if (x.size() != y.size()) fail("bootstrap_pairs: length mismatch");
  if (x.empty()) fail("bootstrap_pairs: empty sample");
  if (resamples < 2) fail("bootstrap_pairs: need at least two resamples");
  std::vector<double> stats(resamples);
  std::vector<double> dx(x.size()), dy(y.size());
  CounterRng rng(seed, 0xb007'5e7);
  for (int r = 0; r < resamples; ++r) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      std::size_t j = rng.below(x.size());
      dx[i] = x[j];
      dy[i] = y[j];
    }
    stats[r] = stat(dx, dy);
  }
  return percentile_interval(std::move(stats), coverage, stat(x, y));
}

}  // namespace spde
