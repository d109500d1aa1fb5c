#pragma once
// spectral cross-check solver: evolves the Fourier coefficients of
// v = Phi(rho) under the projected equation
//   dv_N = Pi_N [ Phi'(rho_N) (Lap v_N - div(nu + B) - f) ] dt
//          + (eps/2) Pi_N [ Phi''(rho_N) sum_j lambda_j^2 |div(sigma(rho_N) e_j)|^2 ] dt
//          - sqrt(eps) Pi_N [ Phi'(rho_N) div(sigma(rho_N) dW) ],
// with rho_N = Phi^{-1}(v_N) pointwise (odd extension of Phi). Time stepping
// is Lawson-Euler: the dominant multiple a*Lap of the diffusion is integrated
// by its exact exponential, the remainder explicitly. Spectral truncation
// does not preserve sign, so emitted states may dip below zero; this solver
// exists to cross-validate the finite-volume one, not to replace it.

#include <cstdint>

#include "spde/coefficients.hpp"
#include "spde/noise.hpp"
#include "spde/solver.hpp"

namespace spde {

// advance from rho0 at time 0 to time T using path increments 0..T/dt-1.
// n_modes is the largest resolved wavenumber; needs 2*n_modes < grid.n so
// every retained sine and cosine is visible on the cell-center grid.
// One dimensional grids only. opt.scheme is ignored.
Trajectory solve_galerkin(const State& rho0, double T, const CoefficientSet& cs,
                          const NoisePath& path, int n_modes,
                          const SolveOptions& opt = {});

}  // namespace spde
