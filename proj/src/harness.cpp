#include "spde/harness.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "spde/coefficients.hpp"
#include "spde/ergodicity.hpp"
#include "spde/flow.hpp"
#include "spde/galerkin.hpp"
#include "spde/grid.hpp"
#include "spde/noise.hpp"
#include "spde/pathfile.hpp"
#include "spde/rng.hpp"
#include "spde/solver.hpp"
#include "spde/stats.hpp"
#include "spde/util.hpp"
#include "json.hpp"

namespace spde {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct Csv {
  std::string file;
  std::vector<std::string> cols;
  std::vector<std::vector<double>> data;  // column major, equal lengths
};

// everything a command produces, before any file is touched. replay calls
// the same compute stage and compares, so this must stay a pure function
// of the config.
struct Outcome {
  std::vector<Check> checks;
  std::vector<std::pair<std::string, std::vector<double>>> series;
  json summary = json::object();
  std::vector<Csv> csvs;
  bool want_path_file = false;  // run() writes the realized noise increments
  std::uint64_t path_seed = 0;
  std::int64_t path_steps = 0;
};

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string series_hash(const std::vector<double>& v) {
  return hex64(fnv1a64(v.data(), v.size() * sizeof(double)));
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// fixed work items into preallocated slots; any schedule produces the same
// slots, and every aggregation below runs serially in index order, so the
// worker count never changes a single bit of the output
void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex guard;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (;;) {
        int i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(guard);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

NoiseBasis basis_of(const ExperimentConfig& cfg) {
  return build_basis(cfg.dim, cfg.cutoff, cfg.rule, cfg.amplitude, cfg.gamma);
}

CoefficientSet set_of(const ExperimentConfig& cfg, const NoiseBasis& basis) {
  PresetParams pp;
  pp.epsilon = cfg.epsilon;
  pp.F1 = eval_constants(basis).F1;
  pp.delta_reg = cfg.delta_reg;
  pp.sigma_cap = cfg.sigma_cap;
  pp.kappa = cfg.kappa;
  pp.sigma_linear = cfg.sigma_linear;
  pp.nu_quadratic = cfg.nu_quadratic;
  pp.b_drift = cfg.b_drift;
  return preset(cfg.preset, pp);
}

// substream tags for per-item seeds; the ergodicity module owns tags 1..7
constexpr std::uint64_t kTagCouple = 8;
constexpr std::uint64_t kTagFlowPath = 9;
constexpr std::uint64_t kTagFlowDraw = 10;

std::uint64_t item_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t i) {
  return stream_word(seed, (tag << 40) + i);
}

bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

Outcome do_simulate(const ExperimentConfig& cfg) {
  Grid g = make_grid(cfg.dim, cfg.n);
  NoiseBasis basis = basis_of(cfg);
  CoefficientSet cs = set_of(cfg, basis);
  State rho0 = make_initial(g, cfg.init);
  NoisePath path = sample_path(basis, cfg.dt, cfg.T, cfg.seed);

  SolveOptions opt;
  // with a reaction the mass audit compares a time integral against the
  // per-step explicit update; step-resolved saves reduce the discrepancy
  // to the trapezoid's half-step boundary term
  if (cs.f) opt.save_every = 1;
  Trajectory tr = solve(rho0, 0.0, cfg.T, cs, path, opt);
  const SaveSeries& s = tr.series;

  std::vector<double> resid(s.t.size(), 0.0);
  double reacted = 0.0;
  double df_max = 0.0;
  for (std::size_t k = 1; k < s.t.size(); ++k) {
    reacted += 0.5 * (s.f_rate[k] + s.f_rate[k - 1]) * (s.t[k] - s.t[k - 1]);
    resid[k] = s.mass[k] - s.mass[0] + reacted;
    df_max = std::max(df_max, std::abs(s.f_rate[k] - s.f_rate[0]));
  }
  double max_resid = 0.0;
  for (double r : resid) max_resid = std::max(max_resid, std::abs(r));

  Outcome out;
  double mass_bound = cfg.tol.mass * s.mass.front();
  if (cs.f) mass_bound += 0.55 * cfg.dt * df_max;
  out.checks.push_back({"mass balance", max_resid <= mass_bound,
                        "max |mass(t) - mass(0) + int f| = " + fmt(max_resid) + " (bound " +
                            fmt(mass_bound) + ")"});

  double min_seen = 0.0;
  for (double m : s.min_rho) min_seen = std::min(min_seen, m);
  bool finite = all_finite(tr.final_state.rho) && all_finite(s.mass);
  out.checks.push_back({"state finite and nonnegative", finite && min_seen >= 0.0,
                        "min over run = " + fmt(min_seen) +
                            (finite ? "" : "; non-finite values appeared")});

  out.series.emplace_back("t", s.t);
  out.series.emplace_back("mass", s.mass);
  out.series.emplace_back("mass_residual", resid);
  out.series.emplace_back("psi1", s.psi1);
  out.series.emplace_back("psi2", s.psi2);
  out.series.emplace_back("grad_phi_sq", s.grad_phi_sq);
  out.series.emplace_back("min_rho", s.min_rho);
  out.series.emplace_back("max_rho", s.max_rho);
  out.series.emplace_back("rho_final", tr.final_state.rho);

  out.summary = {{"scheme", tr.scheme_used},
                 {"implicit_weight", tr.implicit_weight},
                 {"limiter_hits", tr.limiter_hits},
                 {"mass_repair_max", tr.mass_repair_max},
                 {"max_mass_residual", max_resid},
                 {"final_min", min_value(tr.final_state)},
                 {"final_mass", mass(tr.final_state)}};

  out.csvs.push_back({"series.csv",
                      {"t", "mass", "psi1", "psi2", "grad_phi_sq", "sigma2_l1", "nu_l1",
                       "f_rate", "min_rho", "max_rho"},
                      {s.t, s.mass, s.psi1, s.psi2, s.grad_phi_sq, s.sigma2_l1, s.nu_l1,
                       s.f_rate, s.min_rho, s.max_rho}});
  out.csvs.push_back({"mass_residual.csv", {"t", "residual"}, {s.t, resid}});
  {
    Csv prof;
    prof.file = "rho_final.csv";
    if (g.dim == 1) {
      std::vector<double> x(g.cells);
      for (std::int64_t i = 0; i < g.cells; ++i) x[i] = (i + 0.5) * g.h;
      prof.cols = {"x", "rho"};
      prof.data = {x, tr.final_state.rho};
    } else {
      std::vector<double> x(g.cells), y(g.cells);
      for (int j = 0; j < g.n; ++j)
        for (int i = 0; i < g.n; ++i) {
          x[static_cast<std::size_t>(j) * g.n + i] = (i + 0.5) * g.h;
          y[static_cast<std::size_t>(j) * g.n + i] = (j + 0.5) * g.h;
        }
      prof.cols = {"x", "y", "rho"};
      prof.data = {x, y, tr.final_state.rho};
    }
    out.csvs.push_back(std::move(prof));
  }

  if (cs.epsilon > 0.0 && basis.n_modes() > 0) {
    out.want_path_file = true;
    out.path_seed = cfg.seed;
    out.path_steps = steps_of(cfg.T, cfg.dt, "T");
  }
  return out;
}

Outcome do_couple(const ExperimentConfig& cfg) {
  Grid g = make_grid(cfg.dim, cfg.n);
  NoiseBasis basis = basis_of(cfg);
  CoefficientSet cs = set_of(cfg, basis);
  State a0 = make_initial(g, cfg.init);
  State b0 = make_initial(g, cfg.init_b);

  int pairs = cfg.n_paths;
  std::vector<CouplingReport> reps(pairs);
  parallel_for(pairs, cfg.workers, [&](int i) {
    NoisePath path =
        sample_path(basis, cfg.dt, cfg.T, item_seed(cfg.seed, kTagCouple, i));
    reps[i] = contraction_report(a0, b0, cs, path, cfg.T, cfg.tol.contraction);
  });

  int violations = 0;
  double worst = 0.0;
  int worst_pair = 0;
  bool finite = true;
  for (int i = 0; i < pairs; ++i) {
    violations += reps[i].violations;
    if (reps[i].max_ratio > worst) {
      worst = reps[i].max_ratio;
      worst_pair = i;
    }
    finite = finite && all_finite(reps[i].distance);
  }

  Outcome out;
  out.checks.push_back({"contraction envelope", violations == 0,
                        std::to_string(violations) + " violation(s) in " + std::to_string(pairs) +
                            " pair(s); worst d(t)/envelope = " + fmt(worst) + " at pair " +
                            std::to_string(worst_pair)});
  out.checks.push_back({"coupled distances finite", finite,
                        finite ? "all save points finite" : "non-finite distance appeared"});

  out.series.emplace_back("t", reps[0].times);
  for (int i = 0; i < pairs; ++i)
    out.series.emplace_back("distance_" + std::to_string(i), reps[i].distance);
  for (int i = 0; i < pairs; ++i) {
    out.series.emplace_back("final_a_" + std::to_string(i), reps[i].final_a.rho);
    out.series.emplace_back("final_b_" + std::to_string(i), reps[i].final_b.rho);
  }

  double d0 = reps[0].distance.empty() ? 0.0 : reps[0].distance.front();
  out.summary = {{"pairs", pairs},
                 {"violations", violations},
                 {"worst_ratio", worst},
                 {"initial_distance", d0},
                 {"envelope_rate", cs.B_lip + cs.f_lip}};

  Csv dist;
  dist.file = "distances.csv";
  dist.cols = {"t", "bound"};
  dist.data = {reps[0].times, reps[0].bound};
  for (int i = 0; i < pairs; ++i) {
    dist.cols.push_back("pair" + std::to_string(i));
    dist.data.push_back(reps[i].distance);
  }
  out.csvs.push_back(std::move(dist));

  if (cs.epsilon > 0.0 && basis.n_modes() > 0) {
    out.want_path_file = true;
    out.path_seed = item_seed(cfg.seed, kTagCouple, 0);
    out.path_steps = steps_of(cfg.T, cfg.dt, "T");
  }
  return out;
}

Outcome do_flowcheck(const ExperimentConfig& cfg) {
  Grid g = make_grid(cfg.dim, cfg.n);
  NoiseBasis basis = basis_of(cfg);
  CoefficientSet cs = set_of(cfg, basis);
  State rho0 = make_initial(g, cfg.init);
  std::int64_t steps = steps_of(cfg.T, cfg.dt, "T");

  int items = cfg.n_paths;
  std::vector<double> restarts(items), shifts(items), semi(items), cocy(items);
  std::vector<std::uint64_t> seeds(items);
  if (items == 1) {
    restarts[0] = cfg.restart;
    shifts[0] = cfg.shift;
    seeds[0] = cfg.seed;
  } else {
    // random interior restarts and shifts on the step grid, one substream
    // per item so the draw set is independent of the worker count
    for (int i = 0; i < items; ++i) {
      CounterRng rng(cfg.seed, (kTagFlowDraw << 40) + i);
      restarts[i] = (1 + static_cast<std::int64_t>(rng.below(
                             static_cast<std::uint64_t>(steps - 1)))) *
                    cfg.dt;
      shifts[i] = static_cast<std::int64_t>(
                      rng.below(static_cast<std::uint64_t>(2 * steps + 1))) *
                  cfg.dt;
      seeds[i] = item_seed(cfg.seed, kTagFlowPath, i);
    }
  }

  parallel_for(items, cfg.workers, [&](int i) {
    NoisePath path = sample_path(basis, cfg.dt, cfg.T, seeds[i]);
    semi[i] = semiflow_residual(rho0, 0.0, restarts[i], cfg.T, cs, path);
    cocy[i] = cocycle_residual(rho0, shifts[i], cfg.T, cs, path);
  });

  double semi_max = 0.0, cocy_max = 0.0;
  for (int i = 0; i < items; ++i) {
    semi_max = std::max(semi_max, semi[i]);
    cocy_max = std::max(cocy_max, cocy[i]);
  }

  Outcome out;
  out.checks.push_back({"restart identity", semi_max <= cfg.tol.residual,
                        "max L1 residual over " + std::to_string(items) + " run(s) = " +
                            fmt(semi_max) + " (bound " + fmt(cfg.tol.residual) + ")"});
  out.checks.push_back({"noise-shift identity", cocy_max <= cfg.tol.residual,
                        "max L1 residual over " + std::to_string(items) + " run(s) = " +
                            fmt(cocy_max) + " (bound " + fmt(cfg.tol.residual) + ")"});

  out.series.emplace_back("restart_times", restarts);
  out.series.emplace_back("shift_times", shifts);
  out.series.emplace_back("semiflow_residual", semi);
  out.series.emplace_back("cocycle_residual", cocy);
  out.summary = {{"runs", items}, {"semiflow_max", semi_max}, {"cocycle_max", cocy_max}};
  out.csvs.push_back({"flowcheck.csv",
                      {"restart", "shift", "semiflow_residual", "cocycle_residual"},
                      {restarts, shifts, semi, cocy}});
  return out;
}

Outcome do_ergodicity(const ExperimentConfig& cfg) {
  Grid g = make_grid(cfg.dim, cfg.n);
  NoiseBasis basis = basis_of(cfg);
  CoefficientSet cs = set_of(cfg, basis);
  State a0 = make_initial(g, cfg.init);
  State b0 = make_initial(g, cfg.init_b);

  TwoPointStats st = two_point_run(a0, b0, cs, cfg.horizons, cfg.delta, cfg.n_paths, basis,
                                   cfg.dt, cfg.seed);

  Outcome out;
  bool finite = all_finite(st.distances);
  out.checks.push_back({"coupling distances finite", finite,
                        finite ? "all horizons finite" : "non-finite distance appeared"});
  out.checks.push_back(
      {"exceedance trend", st.trend_violations == 0,
       std::to_string(st.trend_violations) +
           " adjacent horizon pair(s) with rising exceedance count (same-noise coupling "
           "must not spread)"});

  json fit_json;
  try {
    MixingFit fit = mixing_fit(st);
    fit_json = {{"alpha_hat", fit.alpha_hat},
                {"alpha_lo", fit.alpha_ci.lo},
                {"alpha_hi", fit.alpha_ci.hi},
                {"note", fit.note}};
  } catch (const error& e) {
    // a fit needs enough live horizons past t = 1; not having them is a
    // property of the configured schedule, not a failed invariant
    fit_json = {{"note", std::string("no fit: ") + e.what()}};
  }

  std::vector<double> counts(st.counts.begin(), st.counts.end());
  std::vector<double> p, lo, hi;
  for (const Interval& iv : st.prob) {
    p.push_back(iv.center);
    lo.push_back(iv.lo);
    hi.push_back(iv.hi);
  }

  out.series.emplace_back("horizons", st.horizons);
  out.series.emplace_back("exceed_counts", counts);
  out.series.emplace_back("distances", st.distances);

  out.summary = {{"n_paths", st.n_paths},
                 {"delta", st.delta},
                 {"trend_violations", st.trend_violations},
                 {"mixing_fit", fit_json}};

  out.csvs.push_back({"exceedance.csv",
                      {"horizon", "count", "p_hat", "wilson_lo", "wilson_hi"},
                      {st.horizons, counts, p, lo, hi}});
  {
    Csv d;
    d.file = "distances.csv";
    std::size_t H = st.horizons.size();
    for (std::size_t k = 0; k < H; ++k) {
      d.cols.push_back("d_at_" + fmt(st.horizons[k]));
      std::vector<double> col(st.n_paths);
      for (int i = 0; i < st.n_paths; ++i) col[i] = st.distances[i * H + k];
      d.data.push_back(std::move(col));
    }
    out.csvs.push_back(std::move(d));
  }
  return out;
}

Outcome do_assumptions(const ExperimentConfig& cfg) {
  NoiseBasis basis = basis_of(cfg);
  CoefficientSet cs = set_of(cfg, basis);
  double F1 = eval_constants(basis).F1;
  double reach = 1.0;
  for (const InitialData* d : {&cfg.init, &cfg.init_b})
    reach = std::max(reach, d->mean + std::abs(d->amplitude) * std::max(1.0, d->mean));
  AssumptionReport ar = verify_assumptions(cs, cfg.epsilon * F1, 2.0 * reach, 2001);

  Outcome out;
  std::vector<double> margins;
  for (const AssumptionItem& item : ar.items) {
    out.checks.push_back({"assumption " + item.id, item.satisfied,
                          "margin " + fmt(item.margin) +
                              (item.note.empty() ? "" : "; " + item.note)});
    margins.push_back(item.margin);
  }
  out.series.emplace_back("margins", margins);
  out.summary = {{"well_posed", ar.well_posed},
                 {"gradient_ok", ar.gradient_ok},
                 {"coercivity_c1", ar.coercivity_c1},
                 {"F1", F1},
                 {"checked_range", 2.0 * reach},
                 {"note", ar.note}};
  return out;
}

Outcome do_selftest(const ExperimentConfig&) {
  Outcome out;
  std::vector<double> values;

  // the flat one-mode family must be spatially stationary with the frozen
  // quadratic variation of the paired sin/cos members
  NoiseBasis nb1 = build_basis(1, 1, "flat", 1.0);
  NoiseConstants nc = eval_constants(nb1);
  bool stat_ok = nc.stationarity_deviation < 1e-12 && std::abs(nc.F1 - 4.0) < 1e-12;
  out.checks.push_back({"noise family stationarity", stat_ok,
                        "deviation " + fmt(nc.stationarity_deviation) + ", quadratic variation " +
                            fmt(nc.F1) + " (expect 4)"});
  values.push_back(nc.stationarity_deviation);
  values.push_back(nc.F1);

  // shifting a path is a pure reindex of the increment stream
  NoisePath p = sample_path(nb1, 1.0 / 64, 1.0, 7);
  NoisePath q = shift_path(p, 8.0 / 64);
  NoisePath qq = shift_path(q, 4.0 / 64);
  bool shift_ok = true;
  for (int n = 0; n < 32; ++n)
    for (int j = 0; j < nb1.n_modes(); ++j) {
      shift_ok = shift_ok && q.increment(j, 0, n) == p.increment(j, 0, n + 8);
      shift_ok = shift_ok && qq.increment(j, 0, n) == p.increment(j, 0, n + 12);
    }
  out.checks.push_back({"increment shift exactness", shift_ok,
                        shift_ok ? "reindex and composition bitwise"
                                 : "shifted increments diverged"});

  // restart and shift identities of the integrator at machine zero
  Grid g = make_grid(1, 32);
  NoiseBasis nb2 = build_basis(1, 2, "flat", 1.0);
  PresetParams pp;
  pp.epsilon = 0.02;
  pp.F1 = eval_constants(nb2).F1;
  CoefficientSet dk = preset("dean_kawasaki", pp);
  State rho0 = make_initial(g, {"cosine", 1.0, 0.4, 1, 0});
  NoisePath path = sample_path(nb2, 1.0 / 128, 0.25, 11);
  double semi = semiflow_residual(rho0, 0.0, 0.125, 0.25, dk, path);
  double cocy = cocycle_residual(rho0, 0.0625, 0.25, dk, path);
  out.checks.push_back({"restart and shift identities", semi == 0.0 && cocy == 0.0,
                        "residuals " + fmt(semi) + " and " + fmt(cocy) + " (expect exact 0)"});
  values.push_back(semi);
  values.push_back(cocy);

  // sorted-coupling transport distance against hand values
  auto point_cloud = [](std::vector<double> xs, std::vector<double> ws) {
    EmpiricalMeasure mu = make_empirical("mean");
    for (double x : xs) add_feature(mu, {x});
    if (!ws.empty()) set_weights(mu, ws);
    return mu;
  };
  double kr1 = kr_distance(point_cloud({0.0, 1.0}, {}), point_cloud({0.5, 0.5}, {}));
  double kr2 = kr_distance(point_cloud({0.0, 1.0}, {}), point_cloud({0.0, 0.5}, {}));
  double kr3 = kr_distance(point_cloud({0.0, 1.0}, {0.75, 0.25}), point_cloud({0.0}, {}));
  bool kr_ok = kr1 == 0.5 && kr2 == 0.25 && kr3 == 0.25;
  out.checks.push_back({"transport distance oracle", kr_ok,
                        "got " + fmt(kr1) + ", " + fmt(kr2) + ", " + fmt(kr3) +
                            " (expect 0.5, 0.25, 0.25)"});
  values.push_back(kr1);
  values.push_back(kr2);
  values.push_back(kr3);

  // the decay-law fit must recover the rate planted in synthetic counts
  TwoPointStats st;
  st.delta = 0.05;
  st.n_paths = 100000;
  for (int k = 1; k <= 4; ++k) {
    double t = std::exp(static_cast<double>(k) * k);  // sqrt(ln t) = k
    double pk = 0.9 * std::pow(0.7, k);               // alpha = 0.3
    st.horizons.push_back(t);
    st.counts.push_back(std::llround(pk * st.n_paths));
    st.prob.push_back(wilson_interval(st.counts.back(), st.n_paths));
  }
  MixingFit fit = mixing_fit(st);
  bool fit_ok = std::abs(fit.alpha_hat - 0.3) <= 0.02;
  out.checks.push_back({"mixing-rate recovery", fit_ok,
                        "alpha_hat = " + fmt(fit.alpha_hat) + " (expect 0.3 +- 0.02)"});
  values.push_back(fit.alpha_hat);

  // noiseless heat flow keeps the cell sum bitwise constant
  CoefficientSet heat = preset("heat", {});
  State h0 = make_initial(g, {"cosine", 1.0, 0.5, 1, 0});
  NoisePath quiet = sample_path(nb1, 1.0 / 128, 0.5, 1);
  Trajectory tr = solve(h0, 0.0, 0.5, heat, quiet, {});
  double drift = 0.0;
  for (double m : tr.series.mass) drift = std::max(drift, std::abs(m - tr.series.mass.front()));
  out.checks.push_back({"conservation bookkeeping", drift == 0.0,
                        "max |mass(t) - mass(0)| = " + fmt(drift) + " (expect exact 0)"});
  values.push_back(drift);

  out.series.emplace_back("selftest_values", values);
  out.summary = {{"checks", static_cast<int>(out.checks.size())}};
  return out;
}

Outcome compute(const ExperimentConfig& cfg) {
  if (cfg.command == "simulate") return do_simulate(cfg);
  if (cfg.command == "couple") return do_couple(cfg);
  if (cfg.command == "flowcheck") return do_flowcheck(cfg);
  if (cfg.command == "ergodicity") return do_ergodicity(cfg);
  if (cfg.command == "check-assumptions") return do_assumptions(cfg);
  if (cfg.command == "selftest") return do_selftest(cfg);
  fail("run: unknown command '" + cfg.command + "'");
}

void write_csv(const std::string& path, const Csv& c) {
  std::ofstream out(path);
  if (!out) fail("run: cannot write '" + path + "'");
  for (std::size_t i = 0; i < c.cols.size(); ++i)
    out << (i ? "," : "") << c.cols[i];
  out << "\n";
  std::size_t rows = c.data.empty() ? 0 : c.data.front().size();
  for (const auto& col : c.data)
    if (col.size() != rows) fail("run: ragged columns in '" + path + "' (internal)");
  char buf[40];
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < c.data.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", c.data[i][r]);
      out << (i ? "," : "") << buf;
    }
    out << "\n";
  }
  if (!out) fail("run: short write to '" + path + "'");
}

bool file_fnv(const std::string& path, std::uint64_t& h) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  h = 0xcbf29ce484222325ull;
  char buf[65536];
  while (in.read(buf, sizeof buf) || in.gcount() > 0)
    h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
  return true;
}

std::string check_line(const Check& c) {
  return (c.pass ? "PASS " : "FAIL ") + c.name + ": " + c.detail;
}

}  // namespace

RunResult run(const ExperimentConfig& cfg, std::ostream& log) {
  RunResult res;
  std::vector<std::string> bad = validate(cfg);
  if (!bad.empty()) {
    log << "config invalid, " << bad.size() << " field(s):\n";
    for (const std::string& b : bad) {
      log << "  " << b << "\n";
      res.checks.push_back(b);
    }
    res.exit_code = 2;
    return res;
  }

  Outcome out;
  try {
    out = compute(cfg);
  } catch (const error& e) {
    log << "error: " << e.what() << "\n";
    res.exit_code = 2;
    return res;
  }

  std::error_code ec;
  fs::create_directories(cfg.out, ec);
  if (ec) {
    log << "error: cannot create output directory '" << cfg.out << "': " << ec.message() << "\n";
    res.exit_code = 2;
    return res;
  }

  json rep;
  rep["command"] = cfg.command;
  // embed the canonical experiment: output dir and thread count are run-site
  // details, and keeping them out lets reruns elsewhere produce the same bytes
  ExperimentConfig canon = cfg;
  canon.out = ".";
  canon.workers = 1;
  rep["config"] = json::parse(serialize_config(canon));
  rep["config_hash"] = config_hash(cfg);

  json files = json::object();
  for (const Csv& c : out.csvs) {
    write_csv(cfg.out + "/" + c.file, c);
    files[c.file.substr(0, c.file.find('.'))] = c.file;
  }
  if (out.want_path_file) {
    NoiseBasis basis = basis_of(cfg);
    NoisePath path = sample_path(basis, cfg.dt, cfg.T, out.path_seed);
    write_path(path, cfg.out + "/noise_path.bin", out.path_steps);
    files["path"] = "noise_path.bin";
    std::uint64_t h = 0;
    if (!file_fnv(cfg.out + "/noise_path.bin", h)) fail("run: path file vanished (internal)");
    rep["path_file_hash"] = hex64(h);
    rep["path_seed"] = out.path_seed;
  }
  rep["files"] = files;

  json checks = json::array();
  bool all_pass = true;
  for (const Check& c : out.checks) {
    checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    all_pass = all_pass && c.pass;
  }
  rep["checks"] = checks;

  json hashes = json::object();
  for (const auto& [name, vec] : out.series) hashes[name] = series_hash(vec);
  rep["series_hash"] = hashes;
  rep["summary"] = out.summary;
  std::string body = rep.dump();
  rep["report_hash"] = hex64(fnv1a64(body.data(), body.size()));

  res.report_file = cfg.out + "/report.json";
  {
    std::ofstream rf(res.report_file);
    if (!rf) fail("run: cannot write '" + res.report_file + "'");
    rf << rep.dump(2) << "\n";
    if (!rf) fail("run: short write to '" + res.report_file + "'");
  }

  for (const Check& c : out.checks) {
    std::string line = check_line(c);
    log << line << "\n";
    res.checks.push_back(line);
  }
  log << "report: " << res.report_file << "\n";
  res.exit_code = all_pass ? 0 : 1;
  return res;
}

RunResult run(const ExperimentConfig& cfg) { return run(cfg, std::cout); }

int replay(const std::string& report_file, std::ostream& log) {
  json rep;
  try {
    std::ifstream in(report_file);
    if (!in) fail("replay: cannot open '" + report_file + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    rep = json::parse(buf.str());
  } catch (const std::exception& e) {
    log << "replay: cannot read report: " << e.what() << "\n";
    return 2;
  }
  for (const char* key : {"command", "config", "config_hash", "series_hash"})
    if (!rep.contains(key)) {
      log << "replay: report lacks '" << key << "'\n";
      return 2;
    }

  ExperimentConfig cfg;
  try {
    cfg = parse_config(rep["config"].dump());
  } catch (const error& e) {
    log << "replay: embedded config is unusable: " << e.what() << "\n";
    return 2;
  }
  std::vector<std::string> bad = validate(cfg);
  if (!bad.empty()) {
    log << "replay: embedded config does not validate:\n";
    for (const std::string& b : bad) log << "  " << b << "\n";
    return 2;
  }

  int failures = 0;
  if (config_hash(cfg) != rep["config_hash"].get<std::string>()) {
    log << "replay: manifest hash mismatch; the embedded config no longer hashes to "
        << rep["config_hash"].get<std::string>() << " (the report was edited after the run)\n";
    ++failures;
  }

  Outcome out;
  try {
    out = compute(cfg);
  } catch (const error& e) {
    log << "replay: re-execution failed: " << e.what() << "\n";
    return 2;
  }

  fs::path dir = fs::path(report_file).parent_path();
  if (dir.empty()) dir = ".";
  if (rep.contains("files") && rep["files"].contains("path")) {
    std::string pf = (dir / rep["files"]["path"].get<std::string>()).string();
    std::uint64_t h = 0;
    if (!file_fnv(pf, h)) {
      log << "replay: noise path file '" << pf
          << "' is missing. the increments are a pure function of the embedded seed";
      if (rep.contains("path_seed")) log << " " << rep["path_seed"].get<std::uint64_t>();
      log << ", so rerunning the embedded config (spde_cli " << cfg.command
          << " --config <this report's config>) regenerates the file bitwise\n";
      ++failures;
    } else {
      if (rep.contains("path_file_hash") && hex64(h) != rep["path_file_hash"].get<std::string>()) {
        log << "replay: noise path file '" << pf << "' differs from the recorded one\n";
        ++failures;
      }
      if (out.want_path_file) {
        // the artifact must also regenerate from the manifest alone
        try {
          NoisePath fresh = sample_path(basis_of(cfg), cfg.dt, cfg.T, out.path_seed);
          NoisePath disk = load_path(pf);
          bool same = disk.dt() == fresh.dt() && disk.seed() == fresh.seed();
          for (std::int64_t n = 0; same && n < out.path_steps; ++n)
            for (int j = 0; same && j < disk.basis().n_modes(); ++j)
              for (int c = 0; c < disk.basis().dim; ++c)
                if (disk.increment(j, c, n) != fresh.increment(j, c, n)) {
                  same = false;
                  break;
                }
          if (!same) throw error("increments differ");
        } catch (const error& e) {
          log << "replay: noise path file '" << pf
              << "' does not regenerate from the embedded seed (" << e.what() << ")\n";
          ++failures;
        }
      }
    }
  }

  std::map<std::string, std::string> fresh;
  for (const auto& [name, vec] : out.series) fresh[name] = series_hash(vec);

  const json& stored = rep["series_hash"];
  std::size_t compared = 0;
  for (auto it = stored.begin(); it != stored.end(); ++it) {
    auto f = fresh.find(it.key());
    if (f == fresh.end()) {
      log << "replay: series '" << it.key() << "' is recorded but was not reproduced\n";
      ++failures;
    } else {
      ++compared;
      if (f->second != it.value().get<std::string>()) {
        log << "replay: series '" << it.key() << "' differs\n";
        ++failures;
      }
    }
  }
  for (const auto& [name, hash] : fresh)
    if (!stored.contains(name)) {
      log << "replay: re-execution produced unrecorded series '" << name << "'\n";
      ++failures;
    }

  if (cfg.command == "couple") {
    // say explicitly that the pairwise trajectories reproduced, both members
    int members = 0, member_bad = 0;
    for (auto it = stored.begin(); it != stored.end(); ++it)
      if (it.key().rfind("final_", 0) == 0) {
        ++members;
        auto f = fresh.find(it.key());
        if (f == fresh.end() || f->second != it.value().get<std::string>()) ++member_bad;
      }
    if (members > 0)
      log << "replay: " << (members - member_bad) << "/" << members
          << " member trajectories match\n";
  }

  if (failures == 0) {
    log << "replay: identical (" << compared << " series match bitwise)\n";
    return 0;
  }
  log << "replay: " << failures << " mismatch(es)\n";
  return 1;
}

int replay(const std::string& report_file) { return replay(report_file, std::cout); }

}  // namespace spde
