#pragma once
// periodic grids on the unit torus and the cell-averaged states living on them

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "spde/util.hpp"

namespace spde {

// uniform grid on [0,1)^dim, n cells per direction, h = 1/n.
// cell centers at (i + 1/2) h, faces at i h.
struct Grid {
  int dim = 1;
  int n = 0;
  double h = 0.0;
  std::int64_t cells = 0;

  bool operator==(const Grid& o) const { return dim == o.dim && n == o.n; }
  bool operator!=(const Grid& o) const { return !(*this == o); }
};

Grid make_grid(int dim, int n);

// cell-averaged density at a fixed time
struct State {
  Grid grid;
  double time = 0.0;
  std::vector<double> rho;
};

State make_state(const Grid& g, const std::function<double(double, double)>& f);

// h^dim * sum rho, pairwise-summed
double mass(const State& s);

// L1 / L2 / sup distances between states on the same grid
double l1_distance(const State& a, const State& b);
double l2_distance(const State& a, const State& b);
double max_distance(const State& a, const State& b);

double min_value(const State& s);

// named initial-data family used by configs and test fixtures.
// kinds: constant, cosine, cosine2, bump, random_smooth.
struct InitialData {
  std::string kind = "constant";
  double mean = 1.0;       // spatial average (mass, since |T^d| = 1)
  double amplitude = 0.0;  // modulation strength
  int wave = 1;            // principal wavenumber
  std::uint64_t seed = 0;  // random_smooth only
};

State make_initial(const Grid& g, const InitialData& init);

}  // namespace spde
