#pragma once
// finite-volume integrator for the conservative SPDE on the periodic torus:
//   d rho = Lap Phi(rho) dt - div(nu(rho) + B(rho)) dt - f(rho) dt
//           - sqrt(eps) div(sigma(rho) dW)
// second-order centered conservative fluxes, donor-cell positivity limiter,
// explicit or semi-implicit (weighted backward Euler on a multiple of the
// Laplacian) time stepping, exact in-step conservation bookkeeping.

#include <cstdint>
#include <string>
#include <vector>

#include "spde/coefficients.hpp"
#include "spde/grid.hpp"
#include "spde/noise.hpp"

namespace spde {

struct SolveOptions {
  std::int64_t save_every = 0;        // stride in steps; 0 picks ~512 saves
  bool store_states = false;          // keep snapshots at save points
  std::string scheme = "auto";        // auto | semi_implicit | explicit
  bool align_saves_absolute = false;  // save at absolute step % stride == 0
};

// diagnostic series sampled at save times
struct SaveSeries {
  std::vector<double> t;
  std::vector<double> mass;         // integral of rho
  std::vector<double> psi1;         // entropy integral of rho ln rho + 1/e
  std::vector<double> psi2;         // Dirichlet integral of sqrt(rho)
  std::vector<double> grad_phi_sq;  // Dirichlet integral of Phi(rho)
  std::vector<double> sigma2_l1;    // integral of sigma^2(rho)
  std::vector<double> nu_l1;        // integral of |nu(rho)|
  std::vector<double> f_rate;       // integral of f(rho), instantaneous
  std::vector<double> min_rho, max_rho;
};

struct Trajectory {
  Grid grid;
  double dt = 0.0;
  std::int64_t s_step = 0, t_step = 0;
  SaveSeries series;
  std::vector<State> states;  // filled when store_states
  State final_state;
  std::string scheme_used;
  double implicit_weight = 0.0;
  std::int64_t limiter_hits = 0;     // cell-steps where the limiter engaged
  double mass_repair_max = 0.0;      // largest relative roundoff repair
};

// integrate from time s to time T (both exact multiples of the path's dt).
// rho0 is the state at time s (its own .time field is ignored). the path
// supplies increments at absolute step indices, so restarted and shifted
// runs consume bitwise-identical noise.
Trajectory solve(const State& rho0, double s, double T, const CoefficientSet& cs,
                 const NoisePath& path, const SolveOptions& opt = {});

// one step at absolute step index n (convenience for tests; solve() reuses
// its internal machinery across steps instead)
State step(const State& state, const CoefficientSet& cs, const NoisePath& path, std::int64_t n,
           const SolveOptions& opt = {});

// conservation audit from the saved series only: residual of
// mass(t) - mass(s) + int_s^t (integral of f) via trapezoid on the save grid.
// returns the largest absolute residual over save times. O(dt) for f != 0,
// rounding-level for f == 0.
double mass_balance_residual(const Trajectory& traj);

// (1 + Dirichlet integral of Phi)^{p/2} per save time
std::vector<double> gradient_functional(const Trajectory& traj, double p);

}  // namespace spde
