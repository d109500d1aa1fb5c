#pragma once
// pathwise flow properties under shared noise: L1 contraction between two
// coupled solves, restart (semiflow) and shift (cocycle) identities, and the
// Holder modulus of the solution in its initial time.

#include <vector>

#include "spde/coefficients.hpp"
#include "spde/grid.hpp"
#include "spde/noise.hpp"
#include "spde/solver.hpp"

namespace spde {

// distance series of two solves driven by the same increments, against the
// admissible growth envelope C(t) d(0) with C(t) = exp(t (Lip(B) + Lip(f)))
struct CouplingReport {
  std::vector<double> times;
  std::vector<double> distance;  // L1 distance at save times
  std::vector<double> bound;     // C(t) * d(0)
  double max_ratio = 0.0;        // max distance / bound, 0 when degenerate
  int violations = 0;            // saves with ratio > 1 + tol
  bool degenerate = false;       // d(0) == 0: violations then counts d >= 1e-10
  double tol = 0.0;
  State final_a, final_b;        // both members at time T, for replay audits
};

CouplingReport contraction_report(const State& rho01, const State& rho02,
                                  const CoefficientSet& cs, const NoisePath& path,
                                  double T, double tol = 5e-3,
                                  const SolveOptions& opt = {});

// || rho(t; s, rho0) - rho(t; s1, rho(s1; s, rho0)) ||_L1 for s <= s1 <= t;
// the restarted leg replays the identical increments, so this is zero up to
// floating-point reassociation
double semiflow_residual(const State& rho0, double s, double s1, double t,
                         const CoefficientSet& cs, const NoisePath& path);

// || rho(s + t; s, rho0, W) - rho(t; 0, rho0, W(s + .) - W(s)) ||_L1; the
// shifted path is an exact reindex of the same increment stream
double cocycle_residual(const State& rho0, double s, double t,
                        const CoefficientSet& cs, const NoisePath& path);

struct ModulusPair {
  double ds = 0.0;    // |s_i - s_j|
  double dist = 0.0;  // sup over shared save times of the L1 distance
  bool in_fit = false;
};

// least-squares exponent of sup_t ||rho(t,s_i) - rho(t,s_j)|| ~ X ds^eta;
// pairs closer than 4 dt (or at zero distance) are excluded from the fit
struct ModulusReport {
  double eta_fit = 0.0;
  double x_fit = 0.0;
  std::vector<ModulusPair> pairs;
};

ModulusReport initial_time_modulus(const State& rho0, const std::vector<double>& s_grid,
                                   double T, const CoefficientSet& cs,
                                   const NoisePath& path);

}  // namespace spde
