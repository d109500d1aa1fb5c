#pragma once
// Monte Carlo instruments for the long-time behaviour of the stochastic
// flow: entropy dissipation budgets, two-point coupling probabilities,
// deterministic contraction rates, support proximity, occupation measures
// with Kantorovich-Rubinstein distances between them, and mixing-rate fits.
//
// laws of infinite-dimensional states are compared through registered
// projections to R^q feature vectors. for q = 1 the KR distance below is
// the exact 1-Wasserstein distance of the weighted samples; for q > 1 it
// is a maximum over a fixed dictionary of 1-Lipschitz functionals and
// therefore a lower bound on the true distance. a lower bound is enough
// to detect non-mixing and to certify convergence trends, which is all
// the checks here need; kr_mode() labels which case applies.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "spde/coefficients.hpp"
#include "spde/grid.hpp"
#include "spde/noise.hpp"
#include "spde/solver.hpp"
#include "spde/stats.hpp"

namespace spde {

// projection from states to feature vectors. registered maps:
//   mean          spatial average (q = 1)
//   second_moment integral of rho^2 (q = 1)
//   fourier1_mag  modulus of the first Fourier coefficient along x (q = 1)
//   mean_m2       {mean, second moment} (q = 2)
//   coarse4       block averages, quarters in d=1 / quadrants in d=2 (q = 4)
struct FeatureMap {
  std::string name;
  int q = 0;
  std::function<std::vector<double>(const State&)> eval;
};

const FeatureMap& feature_map(const std::string& name);
std::vector<std::string> feature_names();

// weighted point cloud in feature space standing in for a law on states.
// empty weights mean uniform; set_weights normalizes so they sum to 1.
struct EmpiricalMeasure {
  std::string feature;
  int q = 0;
  std::vector<double> samples;  // row-major, size() * q entries
  std::vector<double> weights;  // empty = uniform

  std::size_t size() const {
    return q > 0 ? samples.size() / static_cast<std::size_t>(q) : 0;
  }
};

EmpiricalMeasure make_empirical(const std::string& feature);
void add_state(EmpiricalMeasure& mu, const State& s);
void add_feature(EmpiricalMeasure& mu, const std::vector<double>& x);
void set_weights(EmpiricalMeasure& mu, const std::vector<double>& w);

// Kantorovich-Rubinstein distance between two measures over the same
// feature map. q = 1: exact sorted-coupling optimal transport. q > 1:
// dictionary lower bound (see file comment). pseudometric in both cases.
double kr_distance(const EmpiricalMeasure& a, const EmpiricalMeasure& b);

// "exact" when kr_distance is the true 1-Wasserstein distance for this
// measure, "dictionary_lower_bound" otherwise
std::string kr_mode(const EmpiricalMeasure& mu);

// ensemble audit of the entropy dissipation budget
//   sup_t E Psi1(rho(t)) + E int_0^T Psi2 dt <= C (T + Psi1(rho0))
// with Psi1 the shifted entropy integral and Psi2 the Dirichlet integral
// of sqrt(rho), both read off the solver's save series. fitted_c is the
// smallest admissible C over the run. the prefix curve sweep_lhs(t) feeds
// a log-log growth fit; superlinear flags a tail slope above 1.2, which a
// well-posed run (constant plus linear budget) cannot produce.
struct DissipationReport {
  std::vector<double> times;
  std::vector<double> mean_psi1;       // ensemble mean of Psi1 at save times
  std::vector<double> sweep_t;         // prefix horizons (save times past 0)
  std::vector<double> sweep_lhs;       // budget left side up to each horizon
  double sup_mean_psi1 = 0.0;
  double mean_int_psi2 = 0.0;
  double psi1_initial = 0.0;
  double fitted_c = 0.0;
  double c2_one_point = 0.0;   // 4 fitted_c, one-point occupation threshold
  double c2_two_point = 0.0;   // 8 fitted_c, two-point variant
  bool superlinear = false;
  double growth_slope = 0.0;   // fitted log-log tail slope of sweep_lhs
  int n_paths = 0;
  double T = 0.0;
};

DissipationReport dissipation_check(const CoefficientSet& cs, const State& rho0, double T,
                                    int n_paths, const NoiseBasis& basis, double dt,
                                    std::uint64_t seed0);

// coupled two-point experiment: each pair runs both initial data under the
// same realized noise, fresh noise across pairs. per horizon we estimate
// P(L1 distance > delta) with a Wilson interval. the raw distance and
// exceedance matrices (path major) are kept for trend tests and for the
// bootstrap in mixing_fit.
struct TwoPointStats {
  std::vector<double> horizons;
  double delta = 0.0;
  int n_paths = 0;
  std::vector<std::int64_t> counts;     // exceedances per horizon
  std::vector<Interval> prob;           // Wilson intervals per horizon
  std::vector<double> distances;        // n_paths x horizons
  std::vector<std::uint8_t> exceed;     // same shape, d > delta indicator
  int trend_violations = 0;             // adjacent horizon pairs with rising counts
};

TwoPointStats two_point_run(const State& rho01, const State& rho02, const CoefficientSet& cs,
                            const std::vector<double>& horizons, double delta, int n_paths,
                            const NoiseBasis& basis, double dt, std::uint64_t seed0);

// noiseless flow: the same integrator with the noise intensity forced to 0
Trajectory deterministic_flow(const State& rho0, double T, const CoefficientSet& cs, double dt,
                              const SolveOptions& opt = {});

// contraction envelope of the noiseless flow over a family of initial
// data: c_r(t) = max over pairs of the L1 distance at time t. family
// empty picks a fixed library of smooth unit-mass data. rate_fit is the
// exponential decay rate fitted on the tail (t >= T/2); contractive
// records whether the envelope at least halved over the run.
struct ContractivityReport {
  std::vector<double> times;
  std::vector<double> c_r;
  double rate_fit = 0.0;
  bool contractive = false;
  int pairs = 0;
};

ContractivityReport deterministic_contractivity(const CoefficientSet& cs, const Grid& g,
                                                double T, double dt,
                                                const std::vector<State>& family = {});

// Monte Carlo estimate of P( int_0^T d(rho(t), u(t)) dt <= delta / 2 )
// where u is the noiseless flow from the same datum; the time integral is
// a trapezoid over the shared save grid. min_qualifying_delta is twice
// the smallest integral seen, the smallest delta at which at least one
// path qualifies.
struct SupportReport {
  Interval probability;          // Wilson interval of the qualifying fraction
  double fraction = 0.0;         // plain point estimate
  int qualifying = 0;
  int n_paths = 0;
  double delta = 0.0;
  double min_qualifying_delta = 0.0;
};

SupportReport support_proximity(const State& rho0, const CoefficientSet& cs, double T,
                                double delta, int n_paths, const NoiseBasis& basis, double dt,
                                std::uint64_t seed0);

// time-averaged (occupation) law of the flow: feature vectors sampled at
// burn_in + stride, burn_in + 2 stride, ..., up to T, pooled over n_paths
// independent trajectories with uniform weights
EmpiricalMeasure occupation_measure(const State& rho0, const CoefficientSet& cs, double T,
                                    double burn_in, double stride, const std::string& feature,
                                    const NoiseBasis& basis, double dt, std::uint64_t seed0,
                                    int n_paths = 1);

// least-squares fit of the coupling decay law
//   log P(d > delta) = sqrt(ln t) log(1 - alpha) + c
// over horizons past t = 1 with nonzero estimates (at least 4 required).
// alpha_ci is a percentile bootstrap over paths when the exceedance
// matrix is present. all-zero counts mean the chains coupled before the
// first horizon; that degenerate case is reported in note, not an error.
struct MixingFit {
  double alpha_hat = 0.0;
  double slope = 0.0;       // log(1 - alpha_hat)
  double intercept = 0.0;
  double rss = 0.0;
  Interval alpha_ci;
  std::vector<double> fit_x;     // sqrt(ln t) of the horizons used
  std::vector<double> fit_logp;  // log estimates at those horizons
  std::string note;
};

MixingFit mixing_fit(const TwoPointStats& stats);

// two-sample consistency check of the Markov property: the law of
// rho(t) started at rho0 against the law of rho(t) restarted at time s
// from the realized state with fresh independent noise. band is the 95th
// percentile of the KR distance under 500 random re-pairings of the
// pooled samples (the exchangeable null), so within_band means the two
// laws are indistinguishable at Monte Carlo resolution.
struct CkReport {
  double kr = 0.0;
  double band = 0.0;
  bool within_band = false;
  int n_paths = 0;
  std::string feature;
  std::string mode;  // kr_mode of the compared measures
};

CkReport chapman_kolmogorov_check(const State& rho0, const CoefficientSet& cs, double s,
                                  double t, int n_paths, const std::string& feature,
                                  const NoiseBasis& basis, double dt, std::uint64_t seed0);

}  // namespace spde
