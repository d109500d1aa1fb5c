#pragma once
// small numeric helpers shared across modules

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace spde {

using error = std::runtime_error;

[[noreturn]] inline void fail(const std::string& msg) { throw error(msg); }

// pairwise (cascade) summation: error grows like log n instead of n.
// used for every mass/integral reduction so conservation audits are not
// polluted by naive accumulation.
inline double pairwise_sum(const double* x, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  std::size_t half = n / 2;
  return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

inline double pairwise_sum(const std::vector<double>& x) {
  return pairwise_sum(x.data(), x.size());
}

inline double sq(double x) { return x * x; }

// round a time to an integer step count, refusing anything that is not a
// multiple of dt. every public time argument funnels through here so that
// restarted/shifted runs land on identical step indices.
inline std::int64_t steps_of(double t, double dt, const char* what) {
  if (!(dt > 0.0)) fail("steps_of: dt must be positive");
  double raw = t / dt;
  double rounded = std::llround(raw);
  if (std::abs(raw - rounded) > 1e-9 * std::max(1.0, std::abs(raw)))
    fail(std::string(what) + " = " + std::to_string(t) +
         " is not an integer multiple of dt = " + std::to_string(dt) +
         " (t/dt = " + std::to_string(raw) + ")");
  return static_cast<std::int64_t>(rounded);
}

}  // namespace spde
