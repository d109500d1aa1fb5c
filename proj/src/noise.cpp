#include "spde/noise.hpp"

#include <cmath>

namespace spde {

static const double kTau = 6.283185307179586476925287;
static const double kSqrt2 = 1.4142135623730950488;

static double lambda_of(const std::string& rule, double amplitude, double gamma, const int k[2],
                        int dim) {
  double k2 = static_cast<double>(k[0]) * k[0];
  if (dim == 2) k2 += static_cast<double>(k[1]) * k[1];
  if (rule == "flat") return amplitude;
  if (rule == "power_law") return amplitude * std::pow(1.0 + k2, -0.5 * gamma);
  fail("build_basis: unknown amplitude rule '" + rule + "' (expected flat or power_law)");
}

NoiseBasis build_basis(int dim, int cutoff, const std::string& rule, double amplitude,
                       double gamma) {
  if (dim != 1 && dim != 2) fail("build_basis: dim must be 1 or 2");
  if (cutoff < 0) fail("build_basis: cutoff must be nonnegative");
  if (amplitude < 0.0) fail("build_basis: amplitude must be nonnegative");
  if (rule == "power_law" && gamma < 0.0) fail("build_basis: gamma must be nonnegative");

  NoiseBasis b;
  b.dim = dim;
  b.cutoff = cutoff;
  b.rule = rule;
  b.amplitude = amplitude;
  b.gamma = gamma;

  auto push = [&](int k1, int k2) {
    int k[2] = {k1, k2};
    double lam = lambda_of(rule, amplitude, gamma, k, dim);
    if (k1 == 0 && k2 == 0) {
      b.modes.push_back({{0, 0}, false, lam});  // constant member only
      return;
    }
    b.modes.push_back({{k1, k2}, true, lam});
    b.modes.push_back({{k1, k2}, false, lam});
  };

  if (dim == 1) {
    for (int k = 0; k <= cutoff; ++k) push(k, 0);
  } else {
    // half-lattice: k1 = 0 with k2 >= 0, then k1 >= 1 with all k2
    for (int k2 = 0; k2 <= cutoff; ++k2) push(0, k2);
    for (int k1 = 1; k1 <= cutoff; ++k1)
      for (int k2 = -cutoff; k2 <= cutoff; ++k2) push(k1, k2);
  }
  return b;
}

double mode_eval(const NoiseMode& m, int dim, const double* x) {
  double phase = kTau * m.k[0] * x[0];
  if (dim == 2) phase += kTau * m.k[1] * x[1];
  return kSqrt2 * (m.is_sin ? std::sin(phase) : std::cos(phase));
}

void mode_grad(const NoiseMode& m, int dim, const double* x, double* out) {
  double phase = kTau * m.k[0] * x[0];
  if (dim == 2) phase += kTau * m.k[1] * x[1];
  double d = kSqrt2 * kTau * (m.is_sin ? std::cos(phase) : -std::sin(phase));
  out[0] = d * m.k[0];
  if (dim == 2) out[1] = d * m.k[1];
}

NoiseConstants eval_constants(const NoiseBasis& basis, int probe_n) {
  if (probe_n <= 0) probe_n = (basis.dim == 1) ? 2048 : 96;
  std::int64_t points = (basis.dim == 1) ? probe_n : static_cast<std::int64_t>(probe_n) * probe_n;

  std::vector<double> f1(points, 0.0), f3(points, 0.0);
  double x[2], g[2] = {0.0, 0.0};
  for (std::int64_t p = 0; p < points; ++p) {
    if (basis.dim == 1) {
      x[0] = (p + 0.381966) / probe_n;  // irrational offset, avoids lattice alignment
      x[1] = 0.0;
    } else {
      x[0] = (p % probe_n + 0.381966) / probe_n;
      x[1] = (p / probe_n + 0.381966) / probe_n;
    }
    for (const NoiseMode& m : basis.modes) {
      double v = mode_eval(m, basis.dim, x);
      mode_grad(m, basis.dim, x, g);
      double l2 = sq(m.lambda);
      f1[p] += l2 * sq(v);
      f3[p] += l2 * (sq(g[0]) + ((basis.dim == 2) ? sq(g[1]) : 0.0));
    }
  }

  NoiseConstants c;
  c.F1 = pairwise_sum(f1) / points;
  c.F3 = pairwise_sum(f3) / points;
  double dev = 0.0;
  for (std::int64_t p = 0; p < points; ++p) {
    dev = std::max(dev, std::abs(f1[p] - c.F1));
    dev = std::max(dev, std::abs(f3[p] - c.F3));
  }
  c.stationarity_deviation = dev;

  // Hessian sup has a closed form per mode: entry (a,b) magnitude peaks at
  // sqrt(2) (2 pi)^2 |k_a k_b|, so the max-abs entry is governed by
  // max(k1^2, k2^2, |k1 k2|)
  double f4 = 0.0;
  for (const NoiseMode& m : basis.modes) {
    double k1 = std::abs(static_cast<double>(m.k[0]));
    double k2 = (basis.dim == 2) ? std::abs(static_cast<double>(m.k[1])) : 0.0;
    double entry = std::max(std::max(k1 * k1, k2 * k2), k1 * k2);
    f4 += sq(m.lambda) * sq(kSqrt2 * sq(kTau) * entry);
  }
  c.F4 = f4;
  return c;
}

NoisePath::NoisePath(NoiseBasis basis, double dt, std::int64_t n_steps, std::uint64_t seed)
    : basis_(std::move(basis)), dt_(dt), sqrt_dt_(std::sqrt(dt)), seed_(seed), n_steps_(n_steps) {
  if (!(dt > 0.0)) fail("NoisePath: dt must be positive");
  if (n_steps < 0) fail("NoisePath: n_steps must be nonnegative");
}

void NoisePath::attach_buffer(std::shared_ptr<const std::vector<double>> buf, std::int64_t from,
                              std::int64_t steps) {
  if (!buf || steps < 0 ||
      buf->size() != static_cast<std::size_t>(steps) * basis_.n_modes() * basis_.dim)
    fail("NoisePath::attach_buffer: buffer size does not match mode count and steps");
  stored_ = std::move(buf);
  stored_from_ = from;
  stored_steps_ = steps;
}

NoisePath sample_path(const NoiseBasis& basis, double dt, double T, std::uint64_t seed) {
  std::int64_t n = steps_of(T, dt, "sample_path horizon T");
  if (n <= 0) fail("sample_path: horizon must be at least one step");
  return NoisePath(basis, dt, n, seed);
}

NoisePath shift_path(const NoisePath& p, double s) {
  if (!(p.dt() > 0.0)) fail("shift_path: path is empty");
  std::int64_t k = steps_of(s, p.dt(), "shift s");
  NoisePath q = p;
  q.origin_ += k;
  q.n_steps_ = std::max<std::int64_t>(0, p.n_steps_ - k);
  return q;
}

}  // namespace spde
