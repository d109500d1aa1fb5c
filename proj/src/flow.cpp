#include "spde/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "spde/stats.hpp"
#include "spde/util.hpp"

namespace spde {

namespace {

// endpoints-only options for solves whose intermediate saves nobody reads
SolveOptions endpoints_only() {
  SolveOptions opt;
  opt.save_every = std::numeric_limits<std::int64_t>::max();
  return opt;
}

}  // namespace

CouplingReport contraction_report(const State& rho01, const State& rho02,
                                  const CoefficientSet& cs, const NoisePath& path,
                                  double T, double tol, const SolveOptions& opt_in) {
  if (rho01.grid != rho02.grid) fail("contraction_report: initial data on different grids");

  SolveOptions opt = opt_in;
  opt.store_states = true;
  opt.align_saves_absolute = false;
  Trajectory a = solve(rho01, 0.0, T, cs, path, opt);
  Trajectory b = solve(rho02, 0.0, T, cs, path, opt);
  if (a.series.t.size() != b.series.t.size())
    fail("contraction_report: save grids diverged (internal)");

  CouplingReport rep;
  rep.tol = tol;
  rep.times = a.series.t;
  double rate = cs.B_lip + cs.f_lip;
  double d0 = l1_distance(a.states.front(), b.states.front());
  rep.degenerate = d0 == 0.0;
  for (std::size_t k = 0; k < a.states.size(); ++k) {
    double d = l1_distance(a.states[k], b.states[k]);
    double env = std::exp(rate * rep.times[k]) * d0;
    rep.distance.push_back(d);
    rep.bound.push_back(env);
    if (rep.degenerate) {
      if (d >= 1e-10) ++rep.violations;
    } else {
      double ratio = d / env;
      rep.max_ratio = std::max(rep.max_ratio, ratio);
      if (ratio > 1.0 + tol) ++rep.violations;
    }
  }
  rep.final_a = a.final_state;
  rep.final_b = b.final_state;
  return rep;
}

double semiflow_residual(const State& rho0, double s, double s1, double t,
                         const CoefficientSet& cs, const NoisePath& path) {
  double dt = path.dt();
  std::int64_t ks = steps_of(s, dt, "start time s");
  std::int64_t km = steps_of(s1, dt, "restart time s1");
  std::int64_t kt = steps_of(t, dt, "end time t");
  if (ks > km || km > kt) fail("semiflow_residual: need s <= s1 <= t");
  if (ks == kt) return 0.0;

  SolveOptions opt = endpoints_only();
  State whole = solve(rho0, s, t, cs, path, opt).final_state;
  State mid = (km == ks) ? rho0 : solve(rho0, s, s1, cs, path, opt).final_state;
  State two = (km == kt) ? mid : solve(mid, s1, t, cs, path, opt).final_state;
  return l1_distance(whole, two);
}

double cocycle_residual(const State& rho0, double s, double t,
                        const CoefficientSet& cs, const NoisePath& path) {
  double dt = path.dt();
  std::int64_t ks = steps_of(s, dt, "shift s");
  std::int64_t kt = steps_of(t, dt, "horizon t");
  if (ks < 0) fail("cocycle_residual: need s >= 0");
  if (kt == 0) return 0.0;

  SolveOptions opt = endpoints_only();
  State lhs = solve(rho0, s, s + t, cs, path, opt).final_state;
  NoisePath shifted = shift_path(path, s);
  State rhs = solve(rho0, 0.0, t, cs, shifted, opt).final_state;
  return l1_distance(lhs, rhs);
}

ModulusReport initial_time_modulus(const State& rho0, const std::vector<double>& s_grid,
                                   double T, const CoefficientSet& cs,
                                   const NoisePath& path) {
  if (s_grid.size() < 3) fail("initial_time_modulus: need at least 3 start times");
  double dt = path.dt();
  std::int64_t t_step = steps_of(T, dt, "end time T");
  std::vector<std::int64_t> s_steps;
  for (double s : s_grid) {
    std::int64_t k = steps_of(s, dt, "start time");
    if (k < 0 || k >= t_step)
      fail("initial_time_modulus: start times must lie in [0, T)");
    s_steps.push_back(k);
  }

  // one stride for every run so saves land on shared absolute steps
  std::int64_t span = t_step - *std::max_element(s_steps.begin(), s_steps.end());
  SolveOptions opt;
  opt.store_states = true;
  opt.align_saves_absolute = true;
  opt.save_every = std::max<std::int64_t>(1, span / 256);

  std::vector<std::map<std::int64_t, const State*>> saved(s_grid.size());
  std::vector<Trajectory> runs;
  runs.reserve(s_grid.size());
  for (std::size_t i = 0; i < s_grid.size(); ++i)
    runs.push_back(solve(rho0, s_grid[i], T, cs, path, opt));
  for (std::size_t i = 0; i < runs.size(); ++i)
    for (const State& st : runs[i].states)
      saved[i][steps_of(st.time, dt, "save time")] = &st;

  ModulusReport rep;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < s_grid.size(); ++i)
    for (std::size_t j = i + 1; j < s_grid.size(); ++j) {
      double sup = 0.0;
      for (const auto& [step, sa] : saved[i]) {
        auto it = saved[j].find(step);
        if (it == saved[j].end()) continue;
        sup = std::max(sup, l1_distance(*sa, *it->second));
      }
      ModulusPair pair;
      pair.ds = std::abs(s_grid[i] - s_grid[j]);
      pair.dist = sup;
      pair.in_fit = pair.ds >= 4.0 * dt && sup > 0.0;
      rep.pairs.push_back(pair);
      if (pair.in_fit) {
        lx.push_back(std::log(pair.ds));
        ly.push_back(std::log(pair.dist));
      }
    }

  if (lx.size() < 2)
    fail("initial_time_modulus: fewer than two separated pairs with nonzero distance");
  LinearFit fit = linear_fit(lx, ly);
  rep.eta_fit = fit.slope;
  rep.x_fit = std::exp(fit.intercept);
  return rep;
}

}  // namespace spde
