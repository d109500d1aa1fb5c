#pragma once
// coefficient sets for the conservative SPDE: nonlinearities, their
// derivatives, structural flags the solver relies on, preset families,
// the Stratonovich-to-Ito diffusion correction, and a numerical checker
// for the well-posedness/growth/coercivity conditions.

#include <functional>
#include <string>
#include <vector>

#include "spde/grid.hpp"
#include "spde/util.hpp"

namespace spde {

using ScalarFn = std::function<double(double)>;

struct CoefficientSet {
  std::string name = "custom";
  std::string params_json = "{}";  // provenance for reports

  // diffusion nonlinearity and derivatives (odd-extended to xi < 0)
  ScalarFn phi, dphi, d2phi;
  // noise coefficient and derivatives
  ScalarFn sigma, dsigma, d2sigma;
  // reaction, with one-sided Lipschitz bound
  ScalarFn f;
  double f_lip = 0.0;
  // local advection flux nu (empty sigma/nu functions mean identically 0)
  ScalarFn nu, dnu;
  // nonlocal drift: state -> vector field sampled at cell centers
  // (d=1: field size n; d=2: size 2 n^2, x-component first)
  std::function<void(const State&, std::vector<double>&)> B;
  double B_lip = 0.0;

  double epsilon = 0.0;  // noise intensity; solver applies sqrt(epsilon)

  // structural hints
  bool phi_is_identity = false;    // skip the explicit diffusion remainder
  bool phi_id_plus_lip = false;    // Phi = id + psi with bounded psi'
  double psi_slope_max = 0.0;      // sup of psi' = Phi' - 1 (when known)
  double m_growth = 1.0;           // growth exponent for Phi(xi) <= c(1+xi^m)
  double quad_error = 0.0;         // antiderivative table error estimate, if any
};

// parameters for the named preset families (unused fields are ignored)
struct PresetParams {
  double epsilon = 0.0;     // noise intensity written into the set
  double F1 = 0.0;          // basis constant, needed by the Ito correction
  double delta_reg = 0.1;   // sqrt regularization scale
  double sigma_cap = 4.0;   // smooth cap on sigma
  double kappa = 1.0;       // reaction strength
  double sigma_linear = 0.0;  // linear noise coefficient for the heat preset
  double nu_quadratic = 0.0;  // optional quadratic advection flux strength
  double b_drift = 0.0;       // optional single-mode smoothing drift strength
};

// presets: "heat" (identity diffusion, optional linear sigma),
// "dean_kawasaki" (regularized sqrt sigma, diffusion carries the
// Stratonovich correction), "sine_gordon" (identity diffusion, sinusoidal
// reaction, regularized sqrt sigma taken in Ito form).
CoefficientSet preset(const std::string& name, const PresetParams& p = {});

// Stratonovich -> Ito: the corrected diffusion is Phi(xi) = xi +
// (epsilon F1 / 2) g(xi) with g(0) = 0, g' = (sigma')^2. g is tabulated by
// cumulative Gauss-Legendre quadrature and evaluated by cubic Hermite with
// exact slopes; quad_error is an a-posteriori estimate of the table's
// integration error (Gauss vs Simpson disagreement, accumulated).
struct PhiCorrection {
  ScalarFn add;    // (eps F1/2) g, odd-extended, linear beyond the table
  ScalarFn dadd;   // its derivative (analytic)
  ScalarFn d2add;  // second derivative (analytic)
  double quad_error = 0.0;
  double slope_at_zero = 0.0;  // (eps F1/2) sigma'(0)^2
};
PhiCorrection strat_to_ito(const ScalarFn& sigma, const ScalarFn& dsigma,
                           const ScalarFn& d2sigma, double epsilon, double F1);

// numerical audit of the standing conditions on a coefficient set.
// F1_eff is the effective noise constant the caller wants the coercivity
// checked against (typically epsilon * F1(basis)). items of "exists a
// constant" form report the minimal feasible constant over the sampled
// range (satisfied = finite); fixed-form items report their minimal slack.
struct AssumptionItem {
  std::string id;
  bool satisfied = false;
  double margin = 0.0;  // slack, or the minimal constant, see note
  std::string note;
};

struct AssumptionReport {
  std::vector<AssumptionItem> items;
  bool well_posed = false;   // regularity + growth + drift families
  bool gradient_ok = false;  // stochastic coercivity family
  double coercivity_c1 = 0.0;
  std::string note;
  const AssumptionItem* find(const std::string& id) const;
};

AssumptionReport verify_assumptions(const CoefficientSet& cs, double F1_eff, double range,
                                    int n_samples);

// monotone bisection for Phi^{-1}(v) with odd extension, |error| <= 1e-12
double invert_phi(const CoefficientSet& cs, double v);

}  // namespace spde
