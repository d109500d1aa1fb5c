#pragma once
// small statistics kit for the verification harness: binomial confidence
// intervals, percentile bootstrap, and least-squares line fits. Everything
// is deterministic given the seed; bootstrap resampling uses the counter
// generator so results do not depend on call order.

#include <cstdint>
#include <functional>
#include <vector>

namespace spde {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double center = 0.0;
};

// Wilson score interval for a binomial proportion, default 95% (z ~ 1.96)
Interval wilson_interval(std::int64_t successes, std::int64_t trials,
                         double z = 1.959963984540054);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rss = 0.0;  // residual sum of squares
};

// ordinary least squares of y against x; needs >= 2 points and nonconstant x
LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

// linear-interpolated order statistic, q in [0, 1]; copies and sorts
double quantile(std::vector<double> values, double q);

// percentile bootstrap (default 2.5%..97.5%) of a statistic of one sample
Interval bootstrap_percentile(const std::vector<double>& sample,
                              const std::function<double(const std::vector<double>&)>& stat,
                              int resamples = 1000, std::uint64_t seed = 0,
                              double coverage = 0.95);

// same, resampling (x, y) pairs jointly
Interval bootstrap_pairs(const std::vector<double>& x, const std::vector<double>& y,
                         const std::function<double(const std::vector<double>&,
                                                    const std::vector<double>&)>& stat,
                         int resamples = 1000, std::uint64_t seed = 0,
                         double coverage = 0.95);

}  // namespace spde
