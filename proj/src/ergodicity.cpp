#include "spde/ergodicity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "spde/rng.hpp"
#include "spde/util.hpp"

namespace spde {

namespace {

// substream seed for ensemble member i; the tag separates the independent
// draw families a single operation needs (legs, restarts, shuffles)
std::uint64_t member_seed(std::uint64_t seed0, std::uint64_t tag, std::int64_t i) {
  return stream_word(seed0, (tag << 40) + static_cast<std::uint64_t>(i));
}

SolveOptions endpoints_only() {
  SolveOptions opt;
  opt.save_every = std::numeric_limits<std::int64_t>::max();
  return opt;
}

// trapezoid rule on a nonuniform save grid
double trapezoid(const std::vector<double>& t, const std::vector<double>& y) {
  if (t.size() != y.size()) fail("trapezoid: length mismatch");
  double acc = 0.0;
  for (std::size_t k = 1; k < t.size(); ++k)
    acc += 0.5 * (t[k] - t[k - 1]) * (y[k] + y[k - 1]);
  return acc;
}

std::vector<double> eval_mean(const State& s) { return {mass(s)}; }

std::vector<double> eval_second_moment(const State& s) {
  std::vector<double> sqv(s.rho.size());
  for (std::size_t i = 0; i < s.rho.size(); ++i) sqv[i] = s.rho[i] * s.rho[i];
  double hv = std::pow(s.grid.h, s.grid.dim);
  return {hv * pairwise_sum(sqv)};
}

std::vector<double> eval_fourier1_mag(const State& s) {
  const Grid& g = s.grid;
  double cr = 0.0, ci = 0.0;
  const double tau = 6.283185307179586476925287;
  for (std::int64_t idx = 0; idx < g.cells; ++idx) {
    double x = (static_cast<double>(idx % g.n) + 0.5) * g.h;
    cr += s.rho[idx] * std::cos(tau * x);
    ci += s.rho[idx] * std::sin(tau * x);
  }
  double hv = std::pow(g.h, g.dim);
  return {hv * std::hypot(cr, ci)};
}

std::vector<double> eval_mean_m2(const State& s) {
  return {eval_mean(s)[0], eval_second_moment(s)[0]};
}

std::vector<double> eval_coarse4(const State& s) {
  const Grid& g = s.grid;
  std::vector<double> out(4, 0.0);
  if (g.dim == 1) {
    if (g.n % 4 != 0) fail("coarse4 needs n divisible by 4 in d=1");
    int block = g.n / 4;
    for (int i = 0; i < g.n; ++i) out[i / block] += s.rho[i];
    for (double& v : out) v /= block;
  } else {
    if (g.n % 2 != 0) fail("coarse4 needs even n in d=2");
    int half = g.n / 2;
    for (int j = 0; j < g.n; ++j)
      for (int i = 0; i < g.n; ++i)
        out[(j / half) * 2 + (i / half)] += s.rho[static_cast<std::int64_t>(j) * g.n + i];
    for (double& v : out) v /= static_cast<double>(half) * half;
  }
  return out;
}

const std::vector<FeatureMap>& registry() {
  static const std::vector<FeatureMap> maps = {
      {"mean", 1, eval_mean},
      {"second_moment", 1, eval_second_moment},
      {"fourier1_mag", 1, eval_fourier1_mag},
      {"mean_m2", 2, eval_mean_m2},
      {"coarse4", 4, eval_coarse4},
  };
  return maps;
}

// normalized (value, weight) list sorted by value
std::vector<std::pair<double, double>> sorted_atoms(const EmpiricalMeasure& mu) {
  std::size_t m = mu.size();
  std::vector<std::pair<double, double>> atoms(m);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double w = mu.weights.empty() ? 1.0 : mu.weights[i];
    if (w < 0.0) fail("kr_distance: negative weight");
    atoms[i] = {mu.samples[i], w};
    total += w;
  }
  if (!(total > 0.0)) fail("kr_distance: weights sum to zero");
  std::sort(atoms.begin(), atoms.end());
  for (auto& a : atoms) a.second /= total;
  return atoms;
}

// exact 1-Wasserstein distance of two weighted 1-D samples: walk the two
// sorted atom lists in cumulative-mass order, paying |value gap| per unit
// of shared mass (the quantile-function integral)
double transport_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  auto a = sorted_atoms(mu);
  auto b = sorted_atoms(nu);
  std::size_t i = 0, j = 0;
  double ra = a[0].second, rb = b[0].second, dist = 0.0;
  while (i < a.size() && j < b.size()) {
    double m = std::min(ra, rb);
    dist += m * std::abs(a[i].first - b[j].first);
    ra -= m;
    rb -= m;
    if (ra <= 0.0 && ++i < a.size()) ra = a[i].second;
    if (rb <= 0.0 && ++j < b.size()) rb = b[j].second;
  }
  return dist;
}

// weighted mean of a 1-Lipschitz test functional
double mean_functional(const EmpiricalMeasure& mu,
                       const std::function<double(const double*)>& f) {
  std::size_t m = mu.size();
  double acc = 0.0, total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double w = mu.weights.empty() ? 1.0 : mu.weights[i];
    acc += w * f(&mu.samples[i * static_cast<std::size_t>(mu.q)]);
    total += w;
  }
  if (!(total > 0.0)) fail("kr_distance: weights sum to zero");
  return acc / total;
}

// q > 1 lower bound: maximum mean gap over a fixed dictionary of
// 1-Lipschitz functionals (coordinate projections and per-coordinate
// distances to fixed anchors). the dictionary does not depend on the
// inputs, so the bound is a genuine pseudometric.
double dictionary_gap(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  static const double anchors[] = {0.0, 0.25, 0.5, 1.0, 2.0, 4.0};
  double best = 0.0;
  for (int c = 0; c < mu.q; ++c) {
    auto proj = [c](const double* x) { return x[c]; };
    best = std::max(best, std::abs(mean_functional(mu, proj) - mean_functional(nu, proj)));
    for (double a : anchors) {
      auto kink = [c, a](const double* x) { return std::abs(x[c] - a); };
      best = std::max(best, std::abs(mean_functional(mu, kink) - mean_functional(nu, kink)));
    }
  }
  return best;
}

// shared validation for ensemble runs
void check_ensemble(int n_paths, double dt) {
  if (n_paths < 1) fail("need at least one path");
  if (!(dt > 0.0)) fail("dt must be positive");
}

// alpha fitted from (sqrt(ln t), log p) points; empty result when fewer
// than two usable points survive
bool fit_alpha(const std::vector<double>& x, const std::vector<double>& y, double* alpha,
               LinearFit* lf) {
  if (x.size() < 2) return false;
  *lf = linear_fit(x, y);
  *alpha = 1.0 - std::exp(lf->slope);
  return true;
}

}  // namespace

const FeatureMap& feature_map(const std::string& name) {
  for (const FeatureMap& fm : registry())
    if (fm.name == name) return fm;
  std::string known;
  for (const FeatureMap& fm : registry()) known += (known.empty() ? "" : ", ") + fm.name;
  fail("unknown feature map \"" + name + "\" (known: " + known + ")");
}

std::vector<std::string> feature_names() {
  std::vector<std::string> names;
  for (const FeatureMap& fm : registry()) names.push_back(fm.name);
  return names;
}

EmpiricalMeasure make_empirical(const std::string& feature) {
  const FeatureMap& fm = feature_map(feature);
  EmpiricalMeasure mu;
  mu.feature = fm.name;
  mu.q = fm.q;
  return mu;
}

void add_state(EmpiricalMeasure& mu, const State& s) {
  std::vector<double> x = feature_map(mu.feature).eval(s);
  mu.samples.insert(mu.samples.end(), x.begin(), x.end());
}

void add_feature(EmpiricalMeasure& mu, const std::vector<double>& x) {
  if (static_cast<int>(x.size()) != mu.q)
    fail("add_feature: vector has dimension " + std::to_string(x.size()) + ", measure expects " +
         std::to_string(mu.q));
  mu.samples.insert(mu.samples.end(), x.begin(), x.end());
}

void set_weights(EmpiricalMeasure& mu, const std::vector<double>& w) {
  if (w.size() != mu.size()) fail("set_weights: one weight per sample required");
  double total = 0.0;
  for (double v : w) {
    if (!(v >= 0.0)) fail("set_weights: weights must be nonnegative");
    total += v;
  }
  if (!(total > 0.0)) fail("set_weights: weights sum to zero");
  mu.weights = w;
  for (double& v : mu.weights) v /= total;
}

double kr_distance(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  if (a.feature != b.feature)
    fail("kr_distance: feature map mismatch (" + a.feature + " vs " + b.feature + ")");
  if (a.q != b.q) fail("kr_distance: dimension mismatch");
  if (a.size() == 0 || b.size() == 0) fail("kr_distance: empty measure");
  if (!a.weights.empty() && a.weights.size() != a.size())
    fail("kr_distance: weight count mismatch");
  if (!b.weights.empty() && b.weights.size() != b.size())
    fail("kr_distance: weight count mismatch");
  return a.q == 1 ? transport_1d(a, b) : dictionary_gap(a, b);
}

std::string kr_mode(const EmpiricalMeasure& mu) {
  return mu.q == 1 ? "exact" : "dictionary_lower_bound";
}

DissipationReport dissipation_check(const CoefficientSet& cs, const State& rho0, double T,
                                    int n_paths, const NoiseBasis& basis, double dt,
                                    std::uint64_t seed0) {
  check_ensemble(n_paths, dt);
  if (steps_of(T, dt, "dissipation_check horizon") < 1) fail("dissipation_check: T must be positive");

  DissipationReport rep;
  rep.n_paths = n_paths;
  rep.T = T;
  std::vector<double> sum_psi1, sum_psi2;
  double int_psi2_acc = 0.0;
  for (int p = 0; p < n_paths; ++p) {
    NoisePath path = sample_path(basis, dt, T, member_seed(seed0, 1, p));
    Trajectory traj = solve(rho0, 0.0, T, cs, path);
    const SaveSeries& s = traj.series;
    if (p == 0) {
      rep.times = s.t;
      sum_psi1.assign(s.psi1.size(), 0.0);
      sum_psi2.assign(s.psi2.size(), 0.0);
    } else if (s.t.size() != rep.times.size()) {
      fail("dissipation_check: save grids differ across members");
    }
    for (std::size_t k = 0; k < sum_psi1.size(); ++k) {
      sum_psi1[k] += s.psi1[k];
      sum_psi2[k] += s.psi2[k];
    }
    int_psi2_acc += trapezoid(s.t, s.psi2);
  }
  rep.mean_psi1.resize(sum_psi1.size());
  std::vector<double> mean_psi2(sum_psi2.size());
  for (std::size_t k = 0; k < sum_psi1.size(); ++k) {
    rep.mean_psi1[k] = sum_psi1[k] / n_paths;
    mean_psi2[k] = sum_psi2[k] / n_paths;
  }
  rep.sup_mean_psi1 = *std::max_element(rep.mean_psi1.begin(), rep.mean_psi1.end());
  rep.mean_int_psi2 = int_psi2_acc / n_paths;
  rep.psi1_initial = rep.mean_psi1.front();
  rep.fitted_c = (rep.sup_mean_psi1 + rep.mean_int_psi2) / (T + rep.psi1_initial);
  rep.c2_one_point = 4.0 * rep.fitted_c;
  rep.c2_two_point = 8.0 * rep.fitted_c;

  // prefix curve of the budget left side and its log-log tail slope
  double run_sup = rep.mean_psi1.front(), run_int = 0.0;
  for (std::size_t k = 1; k < rep.times.size(); ++k) {
    run_int += 0.5 * (rep.times[k] - rep.times[k - 1]) * (mean_psi2[k] + mean_psi2[k - 1]);
    run_sup = std::max(run_sup, rep.mean_psi1[k]);
    rep.sweep_t.push_back(rep.times[k]);
    rep.sweep_lhs.push_back(run_sup + run_int);
  }
  std::vector<double> lx, ly;
  for (std::size_t k = 0; k < rep.sweep_t.size(); ++k)
    if (rep.sweep_t[k] >= 0.5 * T && rep.sweep_lhs[k] > 0.0) {
      lx.push_back(std::log(rep.sweep_t[k]));
      ly.push_back(std::log(rep.sweep_lhs[k]));
    }
  if (lx.size() >= 2 && lx.front() != lx.back()) {
    rep.growth_slope = linear_fit(lx, ly).slope;
    rep.superlinear = rep.growth_slope > 1.2;
  }
  return rep;
}

TwoPointStats two_point_run(const State& rho01, const State& rho02, const CoefficientSet& cs,
                            const std::vector<double>& horizons, double delta, int n_paths,
                            const NoiseBasis& basis, double dt, std::uint64_t seed0) {
  check_ensemble(n_paths, dt);
  if (rho01.grid != rho02.grid) fail("two_point_run: initial data on different grids");
  if (!(delta > 0.0)) fail("two_point_run: delta must be positive");
  if (horizons.empty()) fail("two_point_run: no horizons");
  std::int64_t prev_step = 0;
  for (double h : horizons) {
    std::int64_t k = steps_of(h, dt, "two_point_run horizon");
    if (k <= prev_step) fail("two_point_run: horizons must be strictly increasing and positive");
    prev_step = k;
  }

  TwoPointStats st;
  st.horizons = horizons;
  st.delta = delta;
  st.n_paths = n_paths;
  std::size_t nh = horizons.size();
  st.counts.assign(nh, 0);
  st.distances.resize(static_cast<std::size_t>(n_paths) * nh);
  st.exceed.resize(st.distances.size());

  SolveOptions eo = endpoints_only();
  for (int p = 0; p < n_paths; ++p) {
    NoisePath path = sample_path(basis, dt, horizons.back(), member_seed(seed0, 2, p));
    State a = rho01, b = rho02;
    double prev = 0.0;
    for (std::size_t j = 0; j < nh; ++j) {
      a = solve(a, prev, horizons[j], cs, path, eo).final_state;
      b = solve(b, prev, horizons[j], cs, path, eo).final_state;
      double d = l1_distance(a, b);
      std::size_t cell = static_cast<std::size_t>(p) * nh + j;
      st.distances[cell] = d;
      st.exceed[cell] = d > delta ? 1 : 0;
      if (d > delta) ++st.counts[j];
      prev = horizons[j];
    }
  }
  for (std::size_t j = 0; j < nh; ++j) {
    st.prob.push_back(wilson_interval(st.counts[j], n_paths));
    if (j > 0 && st.counts[j] > st.counts[j - 1]) ++st.trend_violations;
  }
  return st;
}

Trajectory deterministic_flow(const State& rho0, double T, const CoefficientSet& cs, double dt,
                              const SolveOptions& opt) {
  CoefficientSet quiet = cs;
  quiet.epsilon = 0.0;
  NoiseBasis nb = build_basis(rho0.grid.dim, 0, "flat", 1.0);
  NoisePath path = sample_path(nb, dt, T, 0);
  return solve(rho0, 0.0, T, quiet, path, opt);
}

ContractivityReport deterministic_contractivity(const CoefficientSet& cs, const Grid& g,
                                                double T, double dt,
                                                const std::vector<State>& family) {
  std::vector<State> lib = family;
  if (lib.empty()) {
    // fixed library of smooth unit-mass data: two cosine modulations, a
    // second-harmonic blend, an off-center bump, one filtered random draw
    lib.push_back(make_initial(g, {.kind = "cosine", .mean = 1.0, .amplitude = 0.5, .wave = 1}));
    lib.push_back(make_initial(g, {.kind = "cosine", .mean = 1.0, .amplitude = 0.3, .wave = 2}));
    lib.push_back(make_initial(g, {.kind = "cosine2", .mean = 1.0, .amplitude = 0.35, .wave = 1}));
    lib.push_back(make_initial(g, {.kind = "bump", .mean = 1.0, .amplitude = 1.0}));
    lib.push_back(
        make_initial(g, {.kind = "random_smooth", .mean = 1.0, .amplitude = 0.4, .wave = 2, .seed = 7}));
  }
  if (lib.size() < 2) fail("deterministic_contractivity: need at least two family members");
  for (const State& s : lib)
    if (s.grid != g) fail("deterministic_contractivity: family member on the wrong grid");

  SolveOptions so;
  so.store_states = true;
  std::vector<Trajectory> runs;
  runs.reserve(lib.size());
  for (const State& s : lib) runs.push_back(deterministic_flow(s, T, cs, dt, so));

  ContractivityReport rep;
  rep.times = runs[0].series.t;
  for (const Trajectory& tr : runs)
    if (tr.states.size() != rep.times.size())
      fail("deterministic_contractivity: save grids differ across members");
  rep.c_r.assign(rep.times.size(), 0.0);
  for (std::size_t i = 0; i < runs.size(); ++i)
    for (std::size_t j = i + 1; j < runs.size(); ++j) {
      ++rep.pairs;
      for (std::size_t k = 0; k < rep.times.size(); ++k)
        rep.c_r[k] = std::max(rep.c_r[k], l1_distance(runs[i].states[k], runs[j].states[k]));
    }

  std::vector<double> tx, ty;
  for (std::size_t k = 0; k < rep.times.size(); ++k)
    if (rep.times[k] >= 0.5 * T && rep.c_r[k] > 0.0) {
      tx.push_back(rep.times[k]);
      ty.push_back(std::log(rep.c_r[k]));
    }
  if (tx.size() >= 2 && tx.front() != tx.back()) rep.rate_fit = -linear_fit(tx, ty).slope;
  rep.contractive = rep.c_r.back() <= std::max(1e-12, 0.5 * rep.c_r.front());
  return rep;
}

SupportReport support_proximity(const State& rho0, const CoefficientSet& cs, double T,
                                double delta, int n_paths, const NoiseBasis& basis, double dt,
                                std::uint64_t seed0) {
  check_ensemble(n_paths, dt);
  if (!(delta > 0.0)) fail("support_proximity: delta must be positive");

  SolveOptions so;
  so.store_states = true;
  Trajectory u = deterministic_flow(rho0, T, cs, dt, so);

  SupportReport rep;
  rep.n_paths = n_paths;
  rep.delta = delta;
  double min_integral = std::numeric_limits<double>::infinity();
  for (int p = 0; p < n_paths; ++p) {
    NoisePath path = sample_path(basis, dt, T, member_seed(seed0, 3, p));
    Trajectory traj = solve(rho0, 0.0, T, cs, path, so);
    if (traj.states.size() != u.states.size())
      fail("support_proximity: save grids differ between noisy and quiet runs");
    std::vector<double> dist(u.states.size());
    for (std::size_t k = 0; k < u.states.size(); ++k)
      dist[k] = l1_distance(traj.states[k], u.states[k]);
    double integral = trapezoid(traj.series.t, dist);
    min_integral = std::min(min_integral, integral);
    if (integral <= 0.5 * delta) ++rep.qualifying;
  }
  rep.fraction = static_cast<double>(rep.qualifying) / n_paths;
  rep.probability = wilson_interval(rep.qualifying, n_paths);
  rep.min_qualifying_delta = 2.0 * min_integral;
  return rep;
}

EmpiricalMeasure occupation_measure(const State& rho0, const CoefficientSet& cs, double T,
                                    double burn_in, double stride, const std::string& feature,
                                    const NoiseBasis& basis, double dt, std::uint64_t seed0,
                                    int n_paths) {
  check_ensemble(n_paths, dt);
  if (burn_in < 0.0) fail("occupation_measure: negative burn_in");
  if (stride < dt) fail("occupation_measure: stride must be at least dt");
  std::int64_t burn_steps = steps_of(burn_in, dt, "occupation_measure burn_in");
  std::int64_t stride_steps = steps_of(stride, dt, "occupation_measure stride");
  std::int64_t total_steps = steps_of(T, dt, "occupation_measure horizon");
  if (burn_steps + stride_steps > total_steps)
    fail("occupation_measure: empty sample window, T must reach burn_in + stride");

  EmpiricalMeasure mu = make_empirical(feature);
  SolveOptions eo = endpoints_only();
  for (int p = 0; p < n_paths; ++p) {
    NoisePath path = sample_path(basis, dt, T, member_seed(seed0, 4, p));
    State cur = rho0;
    std::int64_t prev = 0;
    if (burn_steps > 0) {
      cur = solve(cur, 0.0, burn_steps * dt, cs, path, eo).final_state;
      prev = burn_steps;
    }
    // walk the window stride by stride; samples land exactly on
    // burn_in + k stride without storing whole trajectories
    for (std::int64_t k = burn_steps + stride_steps; k <= total_steps; k += stride_steps) {
      cur = solve(cur, prev * dt, k * dt, cs, path, eo).final_state;
      add_state(mu, cur);
      prev = k;
    }
  }
  return mu;
}

MixingFit mixing_fit(const TwoPointStats& st) {
  if (st.n_paths < 1) fail("mixing_fit: empty statistics");
  if (st.counts.size() != st.horizons.size()) fail("mixing_fit: malformed statistics");

  MixingFit fit;
  std::int64_t total = 0;
  for (std::int64_t c : st.counts) total += c;
  if (total == 0) {
    fit.note = "fully mixed before first horizon";
    fit.alpha_hat = 1.0;
    fit.alpha_ci = {1.0, 1.0, 1.0};
    return fit;
  }

  // the decay law uses sqrt(ln t), so only horizons past t = 1 carry a
  // well-defined abscissa; zero counts have no log and are skipped
  auto usable = [&](const std::vector<std::int64_t>& counts, std::vector<double>* x,
                    std::vector<double>* y) {
    x->clear();
    y->clear();
    for (std::size_t j = 0; j < st.horizons.size(); ++j)
      if (st.horizons[j] > 1.0 && counts[j] > 0) {
        x->push_back(std::sqrt(std::log(st.horizons[j])));
        y->push_back(std::log(static_cast<double>(counts[j]) / st.n_paths));
      }
  };
  usable(st.counts, &fit.fit_x, &fit.fit_logp);
  if (fit.fit_x.size() < 4)
    fail("mixing_fit: need at least 4 horizons past t = 1 with nonzero estimates, have " +
         std::to_string(fit.fit_x.size()));
  LinearFit lf;
  fit_alpha(fit.fit_x, fit.fit_logp, &fit.alpha_hat, &lf);
  fit.slope = lf.slope;
  fit.intercept = lf.intercept;
  fit.rss = lf.rss;
  fit.alpha_ci = {fit.alpha_hat, fit.alpha_hat, fit.alpha_hat};

  if (!st.exceed.empty()) {
    // percentile bootstrap over paths: resample exceedance rows, rebuild
    // the per-horizon counts, refit
    std::size_t nh = st.horizons.size();
    CounterRng rng(0xa1fa, 0x31f);
    const int resamples = 1000;
    std::vector<double> alphas;
    alphas.reserve(resamples);
    std::vector<std::int64_t> counts(nh);
    std::vector<double> bx, by;
    for (int r = 0; r < resamples; ++r) {
      std::fill(counts.begin(), counts.end(), 0);
      for (int p = 0; p < st.n_paths; ++p) {
        std::size_t row = rng.below(st.n_paths);
        for (std::size_t j = 0; j < nh; ++j) counts[j] += st.exceed[row * nh + j];
      }
      usable(counts, &bx, &by);
      double a = fit.alpha_hat;
      LinearFit blf;
      if (bx.size() >= 2 && bx.front() != bx.back()) fit_alpha(bx, by, &a, &blf);
      alphas.push_back(a);
    }
    fit.alpha_ci.lo = quantile(alphas, 0.025);
    fit.alpha_ci.hi = quantile(alphas, 0.975);
    fit.alpha_ci.center = fit.alpha_hat;
  }
  return fit;
}

CkReport chapman_kolmogorov_check(const State& rho0, const CoefficientSet& cs, double s,
                                  double t, int n_paths, const std::string& feature,
                                  const NoiseBasis& basis, double dt, std::uint64_t seed0) {
  check_ensemble(n_paths, dt);
  std::int64_t ks = steps_of(s, dt, "chapman_kolmogorov_check restart time");
  std::int64_t kt = steps_of(t, dt, "chapman_kolmogorov_check horizon");
  if (ks < 0 || ks >= kt) fail("chapman_kolmogorov_check: need 0 <= s < t");

  EmpiricalMeasure one_shot = make_empirical(feature);
  EmpiricalMeasure restarted = make_empirical(feature);
  SolveOptions eo = endpoints_only();
  for (int p = 0; p < n_paths; ++p) {
    NoisePath direct = sample_path(basis, dt, t, member_seed(seed0, 5, p));
    add_state(one_shot, solve(rho0, 0.0, t, cs, direct, eo).final_state);
  }
  for (int p = 0; p < n_paths; ++p) {
    State mid = rho0;
    if (ks > 0) {
      NoisePath leg = sample_path(basis, dt, t, member_seed(seed0, 6, p));
      mid = solve(rho0, 0.0, s, cs, leg, eo).final_state;
    }
    NoisePath fresh = sample_path(basis, dt, t, member_seed(seed0, 7, p));
    add_state(restarted, solve(mid, s, t, cs, fresh, eo).final_state);
  }

  CkReport rep;
  rep.n_paths = n_paths;
  rep.feature = feature;
  rep.mode = kr_mode(one_shot);
  rep.kr = kr_distance(one_shot, restarted);

  // exchangeable null: re-pair the pooled samples at random and take the
  // 95th percentile of the resulting distances as the noise floor
  int q = one_shot.q;
  std::vector<double> pool = one_shot.samples;
  pool.insert(pool.end(), restarted.samples.begin(), restarted.samples.end());
  std::size_t rows = 2 * static_cast<std::size_t>(n_paths);
  std::vector<std::size_t> idx(rows);
  CounterRng rng(seed0, 0xcc05);
  const int shuffles = 500;
  std::vector<double> null_kr;
  null_kr.reserve(shuffles);
  for (int r = 0; r < shuffles; ++r) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = rows - 1; i > 0; --i)
      std::swap(idx[i], idx[rng.below(i + 1)]);
    EmpiricalMeasure ga = make_empirical(feature), gb = make_empirical(feature);
    for (std::size_t i = 0; i < rows; ++i) {
      const double* x = &pool[idx[i] * static_cast<std::size_t>(q)];
      EmpiricalMeasure& dst = i < rows / 2 ? ga : gb;
      dst.samples.insert(dst.samples.end(), x, x + q);
    }
    null_kr.push_back(kr_distance(ga, gb));
  }
  rep.band = quantile(null_kr, 0.95);
  rep.within_band = rep.kr <= rep.band;
  return rep;
}

}  // namespace spde
