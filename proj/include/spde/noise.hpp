#pragma once
// spatially correlated conservative noise on the torus: trigonometric mode
// families, their summability constants, and sampled increment paths.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "spde/rng.hpp"
#include "spde/util.hpp"

namespace spde {

// one member of the trigonometric family: sqrt(2) sin(2 pi k.x) or
// sqrt(2) cos(2 pi k.x) with amplitude lambda. k = 0 keeps only the cos
// member (the sin member vanishes identically and is never enumerated).
struct NoiseMode {
  int k[2] = {0, 0};
  bool is_sin = false;
  double lambda = 0.0;
};

struct NoiseBasis {
  int dim = 1;
  int cutoff = 0;            // sup-norm bound on enumerated wavenumbers
  std::string rule;          // "flat" or "power_law"
  double amplitude = 1.0;    // overall lambda scale
  double gamma = 0.0;        // power_law decay exponent
  std::vector<NoiseMode> modes;  // canonical order, keys the RNG substreams

  int n_modes() const { return static_cast<int>(modes.size()); }
  int streams() const { return n_modes() * dim; }
};

// enumerate modes in canonical order: d=1 k = 0..K (cos only at 0, then
// sin before cos per k); d=2 half-lattice k1 > 0 or (k1 = 0, k2 >= 0),
// lexicographic, sin before cos. amplitudes: flat lambda = amplitude,
// power_law lambda = amplitude (1 + |k|^2)^(-gamma/2).
NoiseBasis build_basis(int dim, int cutoff, const std::string& rule,
                       double amplitude, double gamma = 0.0);

// mode function value and first derivatives at a point (x has dim entries)
double mode_eval(const NoiseMode& m, int dim, const double* x);
void mode_grad(const NoiseMode& m, int dim, const double* x, double* out);

// summability constants of the family. F1 and F3 are probed on a grid and
// must be spatially constant for a valid family; F4 uses the closed-form
// per-mode Hessian sup. stationarity_deviation is the worse of the F1/F3
// probe deviations from their means.
struct NoiseConstants {
  double F1 = 0.0;
  double F3 = 0.0;
  double F4 = 0.0;
  double stationarity_deviation = 0.0;
};

NoiseConstants eval_constants(const NoiseBasis& basis, int probe_n = 0);

// a realized increment path: N(0, dt) mode increments addressed by
// (mode, component, step). increments are a pure function of
// (seed, mode, component, absolute step index) via the counter RNG, so
// shifting is pure reindexing and any step is accessible in O(1) without
// storage. paths loaded from disk carry a stored buffer; reads outside it
// fall back to the generator (our writer guarantees agreement).
class NoisePath {
 public:
  NoisePath() = default;
  NoisePath(NoiseBasis basis, double dt, std::int64_t n_steps, std::uint64_t seed);

  const NoiseBasis& basis() const { return basis_; }
  double dt() const { return dt_; }
  std::int64_t n_steps() const { return n_steps_; }
  std::uint64_t seed() const { return seed_; }
  std::int64_t origin() const { return origin_; }

  // n is the step index relative to this path's time origin
  double increment(int mode, int comp, std::int64_t n) const {
    std::int64_t abs_n = origin_ + n;
    if (stored_ && abs_n >= stored_from_ && abs_n < stored_from_ + stored_steps_) {
      std::size_t s = static_cast<std::size_t>(mode) * basis_.dim + comp;
      return (*stored_)[s * stored_steps_ + (abs_n - stored_from_)];
    }
    return sqrt_dt_ *
           normal_at(stream_key(seed_, static_cast<std::uint64_t>(mode) * basis_.dim + comp),
                     abs_n);
  }

  void attach_buffer(std::shared_ptr<const std::vector<double>> buf, std::int64_t from,
                     std::int64_t steps);

  friend NoisePath shift_path(const NoisePath& p, double s);

 private:
  NoiseBasis basis_;
  double dt_ = 0.0;
  double sqrt_dt_ = 0.0;
  std::uint64_t seed_ = 0;
  std::int64_t origin_ = 0;   // absolute step index of path time 0
  std::int64_t n_steps_ = 0;  // advertised horizon (metadata, not a hard wall)
  std::shared_ptr<const std::vector<double>> stored_;
  std::int64_t stored_from_ = 0;
  std::int64_t stored_steps_ = 0;
};

NoisePath sample_path(const NoiseBasis& basis, double dt, double T, std::uint64_t seed);

// time-shift by s (an exact multiple of dt, validated): the shifted path's
// increment (j, c, n) is bitwise the original's (j, c, n + s/dt).
NoisePath shift_path(const NoisePath& p, double s);

}  // namespace spde
