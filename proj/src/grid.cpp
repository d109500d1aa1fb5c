#include "spde/grid.hpp"

#include <cmath>

#include "spde/rng.hpp"

namespace spde {

Grid make_grid(int dim, int n) {
  if (dim != 1 && dim != 2) fail("make_grid: dim must be 1 or 2, got " + std::to_string(dim));
  if (n < 4) fail("make_grid: need at least 4 cells per direction, got " + std::to_string(n));
  Grid g;
  g.dim = dim;
  g.n = n;
  g.h = 1.0 / n;
  g.cells = (dim == 1) ? n : static_cast<std::int64_t>(n) * n;
  return g;
}

State make_state(const Grid& g, const std::function<double(double, double)>& f) {
  State s;
  s.grid = g;
  s.rho.resize(g.cells);
  if (g.dim == 1) {
    for (int i = 0; i < g.n; ++i) s.rho[i] = f((i + 0.5) * g.h, 0.0);
  } else {
    for (int j = 0; j < g.n; ++j)
      for (int i = 0; i < g.n; ++i)
        s.rho[static_cast<std::int64_t>(j) * g.n + i] = f((i + 0.5) * g.h, (j + 0.5) * g.h);
  }
  return s;
}

double mass(const State& s) {
  double hv = (s.grid.dim == 1) ? s.grid.h : s.grid.h * s.grid.h;
  return hv * pairwise_sum(s.rho);
}

static void check_same_grid(const State& a, const State& b, const char* who) {
  if (a.grid != b.grid) fail(std::string(who) + ": states live on different grids");
}

double l1_distance(const State& a, const State& b) {
  check_same_grid(a, b, "l1_distance");
  double hv = (a.grid.dim == 1) ? a.grid.h : a.grid.h * a.grid.h;
  std::vector<double> d(a.rho.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::abs(a.rho[i] - b.rho[i]);
  return hv * pairwise_sum(d);
}

double l2_distance(const State& a, const State& b) {
  check_same_grid(a, b, "l2_distance");
  double hv = (a.grid.dim == 1) ? a.grid.h : a.grid.h * a.grid.h;
  std::vector<double> d(a.rho.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = sq(a.rho[i] - b.rho[i]);
  return std::sqrt(hv * pairwise_sum(d));
}

double max_distance(const State& a, const State& b) {
  check_same_grid(a, b, "max_distance");
  double m = 0.0;
  for (std::size_t i = 0; i < a.rho.size(); ++i) m = std::max(m, std::abs(a.rho[i] - b.rho[i]));
  return m;
}

double min_value(const State& s) {
  double m = s.rho.empty() ? 0.0 : s.rho[0];
  for (double v : s.rho) m = std::min(m, v);
  return m;
}

State make_initial(const Grid& g, const InitialData& init) {
  const double tau = 6.283185307179586476925287;
  if (init.mean < 0.0) fail("make_initial: mean must be nonnegative");
  if (init.kind == "constant") {
    return make_state(g, [&](double, double) { return init.mean; });
  }
  if (init.kind == "cosine") {
    // nonnegative as long as |amplitude| <= mean
    if (std::abs(init.amplitude) > init.mean)
      fail("make_initial: cosine amplitude exceeds mean, data would be negative");
    int w = init.wave;
    return make_state(g, [&](double x, double y) {
      double c = std::cos(tau * w * x) * ((g.dim == 2) ? std::cos(tau * w * y) : 1.0);
      return init.mean + init.amplitude * c;
    });
  }
  if (init.kind == "cosine2") {
    // two incommensurate-looking modes, still mean-exact
    if (std::abs(init.amplitude) > 0.9 * init.mean)
      fail("make_initial: cosine2 amplitude too large for nonnegativity");
    int w = init.wave;
    return make_state(g, [&](double x, double y) {
      double c = 0.7 * std::cos(tau * w * x) + 0.3 * std::sin(tau * (w + 2) * x);
      if (g.dim == 2) c += 0.3 * std::cos(tau * w * y);
      return init.mean + init.amplitude * c;
    });
  }
  if (init.kind == "bump") {
    // smooth periodic bump exp(amplitude cos(...)), rescaled to the target mean
    State s = make_state(g, [&](double x, double y) {
      double c = std::cos(tau * (x - 0.5)) + ((g.dim == 2) ? std::cos(tau * (y - 0.5)) : 0.0);
      return std::exp(init.amplitude * c);
    });
    double m = mass(s);
    if (m <= 0.0) fail("make_initial: degenerate bump");
    for (double& v : s.rho) v *= init.mean / m;
    return s;
  }
  if (init.kind == "random_smooth") {
    // low-mode random trigonometric polynomial with 1/k^2 decay; the
    // fluctuation is sup-normalized so rho = mean (1 + amplitude v) stays
    // positive for |amplitude| < 1, then mass is restored exactly
    if (std::abs(init.amplitude) >= 1.0)
      fail("make_initial: random_smooth needs |amplitude| < 1");
    CounterRng rng(init.seed, 0xf1e1d);
    int modes = std::max(1, init.wave);
    std::vector<double> as(modes), bs(modes);
    for (int k = 0; k < modes; ++k) {
      as[k] = rng.normal() / sq(k + 1.0);
      bs[k] = rng.normal() / sq(k + 1.0);
    }
    State s = make_state(g, [&](double x, double y) {
      double v = 0.0;
      for (int k = 0; k < modes; ++k)
        v += as[k] * std::cos(tau * (k + 1) * x) + bs[k] * std::sin(tau * (k + 1) * x);
      if (g.dim == 2) v *= std::cos(tau * y);
      return v;
    });
    double sup = 0.0;
    for (double v : s.rho) sup = std::max(sup, std::abs(v));
    if (sup <= 0.0) sup = 1.0;
    for (double& v : s.rho) v = init.mean * (1.0 + init.amplitude * v / sup);
    double m = mass(s);
    for (double& v : s.rho) v *= init.mean / m;
    return s;
  }
  fail("make_initial: unknown kind '" + init.kind + "'");
}

}  // namespace spde
