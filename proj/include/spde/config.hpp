#pragma once
// experiment configuration: one flat JSON-serializable record covering every
// CLI subcommand. parsing is strict (unknown keys are errors, missing keys
// take the documented defaults) and validation reports every offending field
// in one pass instead of stopping at the first, so a bad file is fixed in
// one round trip. nothing in here clamps: a value the solver cannot honor
// is rejected, never adjusted.

#include <cstdint>
#include <string>
#include <vector>

#include "spde/grid.hpp"

namespace spde {

// pass/fail bounds the run commands check their outputs against
struct Tolerances {
  double mass = 1e-12;         // relative mass-balance residual, simulate
  double contraction = 5e-3;   // envelope slack d(t) <= (1+tol) C(t) d(0), couple
  double residual = 1e-12;     // semiflow/cocycle residual bound, flowcheck
};

struct ExperimentConfig {
  std::string command = "simulate";  // simulate | couple | flowcheck |
                                     // ergodicity | check-assumptions | selftest

  // coefficient family (unused preset parameters are ignored by the preset)
  std::string preset = "heat";
  double epsilon = 0.0;
  double delta_reg = 0.1;
  double sigma_cap = 4.0;
  double kappa = 1.0;
  double sigma_linear = 0.0;
  double nu_quadratic = 0.0;
  double b_drift = 0.0;

  // discretization
  int dim = 1;
  int n = 128;
  double dt = 0.001953125;  // 1/512, keeps save/shift times on the step grid
  double T = 1.0;

  // noise spectrum
  int cutoff = 1;
  std::string rule = "flat";   // flat | power_law
  double amplitude = 1.0;
  double gamma = 0.0;          // power_law decay exponent

  // initial data; init_b is the second member for couple and ergodicity
  InitialData init{"cosine", 1.0, 0.5, 1, 0};
  InitialData init_b{"cosine", 1.0, 0.25, 2, 0};

  // run bookkeeping
  std::uint64_t seed = 1;
  int n_paths = 1;   // ensemble size (pairs for couple/ergodicity)
  int workers = 1;   // worker threads for ensemble commands
  std::string out = "out";

  // flowcheck times: residuals of the restart identity at restart and of
  // the noise-shift identity at shift, both over [0, T]
  double shift = 0.25;
  double restart = 0.5;

  // ergodicity block
  std::vector<double> horizons = {0.25, 0.5, 1.0, 2.0};
  double delta = 0.05;        // exceedance threshold for the coupled pairs
  std::string feature = "mean";

  Tolerances tol;
};

// JSON text <-> config. parse rejects unknown keys, wrong types, and a
// malformed document with messages naming the key; serialize(parse(text))
// reproduces every field bitwise (numbers round-trip through shortest
// decimal form).
ExperimentConfig parse_config(const std::string& json_text);
std::string serialize_config(const ExperimentConfig& cfg);

ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& cfg, const std::string& path);

// one message per offending field, empty when the config is runnable.
// includes the solver's a-priori stability bounds (reaction dt * Lip(f),
// explicit-diffusion and advection CFL probed over the initial data range)
// and the alignment of every time field with the step grid.
std::vector<std::string> validate(const ExperimentConfig& cfg);

// FNV-1a 64 of the canonical serialized form, as 16 hex digits; names the
// exact experiment in reports and replay manifests
std::string config_hash(const ExperimentConfig& cfg);

// FNV-1a 64 of arbitrary bytes (exposed for report/series hashing)
std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t h = 0xcbf29ce484222325ull);

}  // namespace spde
