#include "spde/coefficients.hpp"

#include <json.hpp>

#include <cmath>
#include <memory>

namespace spde {

// ---------------------------------------------------------------------------
// uniform Hermite table: cubic interpolation with exact slopes at the knots.
// used for the sqrt-correction antiderivative (quadrature-built values) and
// as a fast evaluator for smooth scalar functions on the solver hot path.
// odd-extended below zero, linear continuation past the right edge.

namespace {

struct HermiteTable {
  double dx = 0.0, xmax = 0.0;
  std::vector<double> v, s;  // values and slopes at knots

  double eval(double x) const {
    double sign = 1.0;
    if (x < 0.0) {
      sign = -1.0;
      x = -x;
    }
    if (x >= xmax) return sign * (v.back() + s.back() * (x - xmax));
    double u = x / dx;
    std::size_t i = static_cast<std::size_t>(u);
    if (i >= v.size() - 1) i = v.size() - 2;
    double t = u - static_cast<double>(i);
    double h00 = (1.0 + 2.0 * t) * sq(1.0 - t);
    double h10 = t * sq(1.0 - t);
    double h01 = t * t * (3.0 - 2.0 * t);
    double h11 = t * t * (t - 1.0);
    return sign * (h00 * v[i] + dx * h10 * s[i] + h01 * v[i + 1] + dx * h11 * s[i + 1]);
  }
};

// cumulative antiderivative of w on [0, xmax]: per-interval 5-point
// Gauss-Legendre, with a composite-Simpson cross check accumulated into an
// error estimate. slopes stored exactly as w(knot).
std::shared_ptr<HermiteTable> antiderivative_table(const ScalarFn& w, double xmax, double dx,
                                                   double* err_out) {
  static const double gx[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                               0.5384693101056831, 0.9061798459386640};
  static const double gw[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                               0.4786286704993665, 0.2369268850561891};
  auto tab = std::make_shared<HermiteTable>();
  std::size_t nk = static_cast<std::size_t>(std::ceil(xmax / dx)) + 1;
  tab->dx = dx;
  tab->xmax = dx * (nk - 1);
  tab->v.resize(nk);
  tab->s.resize(nk);
  double acc = 0.0, err = 0.0;
  tab->v[0] = 0.0;
  tab->s[0] = w(0.0);
  for (std::size_t i = 1; i < nk; ++i) {
    double a = (i - 1) * dx, mid = a + 0.5 * dx;
    double gauss = 0.0;
    for (int q = 0; q < 5; ++q) gauss += gw[q] * w(mid + 0.5 * dx * gx[q]);
    gauss *= 0.5 * dx;
    double wa = tab->s[i - 1], wb = w(a + dx);
    double simpson = dx / 6.0 * (wa + 4.0 * w(mid) + wb);
    err += std::abs(gauss - simpson);
    acc += gauss;
    tab->v[i] = acc;
    tab->s[i] = wb;
  }
  if (err_out) *err_out = err;
  return tab;
}

// regularized square root with a smooth cap:
// r(xi) = sqrt(xi + delta^2) - delta, sigma = M tanh(r / M)
struct SqrtSigma {
  double delta, cap;
  double r(double xi) const { return std::sqrt(xi + delta * delta) - delta; }
  double dr(double xi) const { return 0.5 / std::sqrt(xi + delta * delta); }
  double d2r(double xi) const { return -0.25 / std::pow(xi + delta * delta, 1.5); }
  double value(double xi) const { return cap * std::tanh(r(xi) / cap); }
  double deriv(double xi) const {
    double t = std::tanh(r(xi) / cap);
    return (1.0 - t * t) * dr(xi);
  }
  double deriv2(double xi) const {
    double t = std::tanh(r(xi) / cap);
    double sech2 = 1.0 - t * t;
    double rp = dr(xi);
    return sech2 * (d2r(xi) - 2.0 / cap * t * rp * rp);
  }
};

std::string params_string(const PresetParams& p, const char* which) {
  nlohmann::json j;
  j["preset"] = which;
  j["epsilon"] = p.epsilon;
  j["F1"] = p.F1;
  if (std::string(which) != "heat") {
    j["delta_reg"] = p.delta_reg;
    j["sigma_cap"] = p.sigma_cap;
  }
  if (std::string(which) == "sine_gordon") j["kappa"] = p.kappa;
  if (p.sigma_linear != 0.0) j["sigma_linear"] = p.sigma_linear;
  if (p.nu_quadratic != 0.0) j["nu_quadratic"] = p.nu_quadratic;
  if (p.b_drift != 0.0) j["b_drift"] = p.b_drift;
  return j.dump();
}

void attach_optional_terms(CoefficientSet& cs, const PresetParams& p) {
  if (p.nu_quadratic != 0.0) {
    double q = p.nu_quadratic;
    cs.nu = [q](double xi) { return 0.5 * q * xi * xi; };
    cs.dnu = [q](double xi) { return q * xi; };
  }
  if (p.b_drift != 0.0) {
    // single-mode smoothing drift: B(rho)(x) = b sqrt(2) (C cos 2 pi x +
    // S sin 2 pi x) with C, S the first trigonometric moments of rho.
    // maps L1 into W^{1,inf} with Lipschitz constant <= 2 sqrt(2) b (1 + 2 pi).
    double b = p.b_drift;
    cs.B = [b](const State& st, std::vector<double>& out) {
      if (st.grid.dim != 1) fail("preset drift B: only d=1 supported");
      const double tau = 6.283185307179586476925287;
      int n = st.grid.n;
      double h = st.grid.h;
      double C = 0.0, S = 0.0;
      for (int i = 0; i < n; ++i) {
        double x = (i + 0.5) * h;
        C += std::cos(tau * x) * st.rho[i];
        S += std::sin(tau * x) * st.rho[i];
      }
      C *= h;
      S *= h;
      out.resize(n);
      const double rt2 = 1.4142135623730950488;
      for (int i = 0; i < n; ++i) {
        double x = (i + 0.5) * h;
        out[i] = b * rt2 * (C * std::cos(tau * x) + S * std::sin(tau * x));
      }
    };
    cs.B_lip = 2.0 * 1.4142135623730950488 * std::abs(b) * (1.0 + 6.283185307179586);
  }
}

}  // namespace

PhiCorrection strat_to_ito(const ScalarFn& sigma, const ScalarFn& dsigma, const ScalarFn& d2sigma,
                           double epsilon, double F1) {
  if (!sigma || !dsigma) fail("strat_to_ito: sigma and dsigma are required");
  if (epsilon < 0.0 || F1 < 0.0) fail("strat_to_ito: epsilon and F1 must be nonnegative");
  if (std::abs(sigma(0.0)) > 1e-12) fail("strat_to_ito: sigma(0) must vanish");

  PhiCorrection out;
  double scale = 0.5 * epsilon * F1;
  out.slope_at_zero = scale * sq(dsigma(0.0));
  if (scale == 0.0) {
    out.add = [](double) { return 0.0; };
    out.dadd = [](double) { return 0.0; };
    out.d2add = [](double) { return 0.0; };
    return out;
  }
  ScalarFn w = [dsigma](double x) { return sq(dsigma(x)); };
  double err = 0.0;
  auto tab = antiderivative_table(w, 64.0, 2.5e-4, &err);
  out.quad_error = scale * err;
  out.add = [tab, scale](double x) { return scale * tab->eval(x); };
  out.dadd = [dsigma, scale](double x) { return scale * sq(dsigma(std::abs(x))); };
  if (d2sigma) {
    out.d2add = [dsigma, d2sigma, scale](double x) {
      double a = std::abs(x), sign = (x < 0.0) ? -1.0 : 1.0;
      return sign * 2.0 * scale * dsigma(a) * d2sigma(a);
    };
  }
  return out;
}

CoefficientSet preset(const std::string& name, const PresetParams& p) {
  if (p.epsilon < 0.0) fail("preset: epsilon must be nonnegative");
  CoefficientSet cs;
  cs.name = name;
  cs.epsilon = p.epsilon;
  cs.params_json = params_string(p, name.c_str());

  auto identity_phi = [&cs]() {
    cs.phi = [](double x) { return x; };
    cs.dphi = [](double) { return 1.0; };
    cs.d2phi = [](double) { return 0.0; };
    cs.phi_is_identity = true;
    cs.phi_id_plus_lip = true;
    cs.psi_slope_max = 0.0;
  };

  if (name == "heat") {
    identity_phi();
    if (p.sigma_linear != 0.0) {
      double b = p.sigma_linear;
      cs.sigma = [b](double x) { return b * x; };
      cs.dsigma = [b](double) { return b; };
      cs.d2sigma = [](double) { return 0.0; };
    }
    attach_optional_terms(cs, p);
    return cs;
  }

  if (name == "dean_kawasaki" || name == "sine_gordon") {
    if (!(p.delta_reg > 0.0)) fail("preset: delta_reg must be positive");
    if (!(p.sigma_cap > 0.0)) fail("preset: sigma_cap must be positive");
    auto sg = std::make_shared<SqrtSigma>(SqrtSigma{p.delta_reg, p.sigma_cap});
    cs.sigma = [sg](double x) { return sg->value(std::abs(x)); };
    cs.dsigma = [sg](double x) { return sg->deriv(std::abs(x)); };
    cs.d2sigma = [sg](double x) { return sg->deriv2(std::abs(x)); };

    if (name == "sine_gordon") {
      // reaction kappa sin(xi); diffusion stays the identity (the noise
      // coefficient is taken in Ito form, no diffusion correction)
      identity_phi();
      if (p.kappa < 0.0) fail("preset: kappa must be nonnegative");
      double k = p.kappa;
      cs.f = [k](double x) { return k * std::sin(x); };
      cs.f_lip = k;
      attach_optional_terms(cs, p);
      return cs;
    }

    // dean_kawasaki: diffusion carries the Stratonovich correction
    if (p.F1 < 0.0) fail("preset: F1 must be nonnegative");
    PhiCorrection corr = strat_to_ito(cs.sigma, cs.dsigma, cs.d2sigma, p.epsilon, p.F1);
    cs.quad_error = corr.quad_error;
    cs.psi_slope_max = corr.slope_at_zero;
    cs.phi_id_plus_lip = true;
    if (corr.slope_at_zero == 0.0) {
      cs.phi = [](double x) { return x; };
      cs.dphi = [](double) { return 1.0; };
      cs.d2phi = [](double) { return 0.0; };
      cs.phi_is_identity = true;
    } else {
      ScalarFn add = corr.add, dadd = corr.dadd, d2add = corr.d2add;
      cs.phi = [add](double x) { return x + add(x); };
      cs.dphi = [dadd](double x) { return 1.0 + dadd(x); };
      cs.d2phi = d2add;
      cs.phi_is_identity = false;
    }
    attach_optional_terms(cs, p);
    return cs;
  }

  fail("preset: unknown name '" + name + "' (expected heat, dean_kawasaki, sine_gordon)");
}

// ---------------------------------------------------------------------------
// assumption verification

namespace {

// sample grid: log-spaced tail into the origin plus a linear sweep of the range
std::vector<double> sample_grid(double range, int n) {
  std::vector<double> xs;
  xs.reserve(n);
  int nlog = n / 3;
  for (int i = 0; i < nlog; ++i)
    xs.push_back(std::pow(10.0, -8.0 + 8.0 * double(i) / std::max(1, nlog - 1)) *
                 std::min(1.0, range));
  for (int i = 0; i < n - nlog; ++i) xs.push_back(range * double(i + 1) / (n - nlog));
  return xs;
}

double eval_or0(const ScalarFn& f, double x) { return f ? f(x) : 0.0; }

}  // namespace

const AssumptionItem* AssumptionReport::find(const std::string& id) const {
  for (const auto& it : items)
    if (it.id == id) return &it;
  return nullptr;
}

AssumptionReport verify_assumptions(const CoefficientSet& cs, double F1_eff, double range,
                                    int n_samples) {
  if (!(range > 0.0)) fail("verify_assumptions: range must be positive");
  if (n_samples < 16) fail("verify_assumptions: need at least 16 samples");
  if (!cs.phi || !cs.dphi) fail("verify_assumptions: coefficient set lacks phi/dphi");

  AssumptionReport rep;
  rep.note =
      "computed noise constant convention: F1 of the sqrt(2) sin/cos family is "
      "2*sum lambda_k^2 over pairs (plus 2 lambda_0^2); conventions quoting "
      "sum lambda_k^2 differ by that factor of 2. F1_eff passed here = " +
      std::to_string(F1_eff);
  auto add_item = [&rep](const std::string& id, bool ok, double margin, const std::string& note) {
    rep.items.push_back({id, ok, margin, note});
  };

  std::vector<double> xs = sample_grid(range, n_samples);

  // --- regularity family -------------------------------------------------
  {
    double worst = 0.0;
    for (double x : xs) {
      double h = 1e-6 * std::max(1.0, x);
      double fd = (cs.phi(x + h) - cs.phi(std::max(0.0, x - h))) / (h + std::min(h, x));
      worst = std::max(worst, std::abs(fd - cs.dphi(x)) / std::max(1.0, std::abs(cs.dphi(x))));
      if (cs.sigma) {
        double fs = (cs.sigma(x + h) - cs.sigma(std::max(0.0, x - h))) / (h + std::min(h, x));
        worst = std::max(worst, std::abs(fs - cs.dsigma(x)) / std::max(1.0, std::abs(cs.dsigma(x))));
      }
      if (cs.nu) {
        double fn = (cs.nu(x + h) - cs.nu(std::max(0.0, x - h))) / (h + std::min(h, x));
        worst = std::max(worst, std::abs(fn - cs.dnu(x)) / std::max(1.0, std::abs(cs.dnu(x))));
      }
    }
    add_item("derivative_consistency", worst < 1e-3, worst,
             "max relative mismatch of analytic derivatives vs central differences");
  }
  {
    double z = std::abs(cs.phi(0.0));
    add_item("phi_zero", z <= 1e-12, z, "|phi(0)|, must vanish");
    double mn = 1e300;
    for (double x : xs) mn = std::min(mn, cs.dphi(x));
    add_item("phi_increasing", mn > 0.0, mn, "min phi' over the sampled range");
  }
  {
    double c = 0.0;
    for (double x = 1e-8; x <= 1e-2; x *= 1.77827941)
      c = std::max(c, sq(eval_or0(cs.sigma, x)) / x);
    add_item("sigma_origin_limit", std::isfinite(c), c,
             "minimal c with sigma^2(xi) <= c xi near the origin");
  }
  {
    double runmax = 0.0, c = 0.0;
    for (double x : xs) {
      runmax = std::max(runmax, sq(eval_or0(cs.sigma, x)));
      c = std::max(c, runmax / (1.0 + x + sq(eval_or0(cs.sigma, x))));
    }
    add_item("sigma_running_sup", std::isfinite(c), c,
             "minimal c with sup_{xi'<=xi} sigma^2 <= c (1 + xi + sigma^2(xi))");
    runmax = 0.0;
    c = 0.0;
    for (double x : xs) {
      runmax = std::max(runmax, std::abs(eval_or0(cs.nu, x)));
      c = std::max(c, runmax / (1.0 + x + std::abs(eval_or0(cs.nu, x))));
    }
    add_item("nu_running_sup", std::isfinite(c), c,
             cs.nu ? "minimal c for the running sup of |nu|" : "nu absent, trivially satisfied");
  }

  // --- growth family: Theta_p(xi) = int_0^xi s^{(p-2)/2} sqrt(phi'(s)) ds --
  const int fine_n = 4 * n_samples;
  std::vector<double> fx(fine_n + 1), theta2(fine_n + 1), theta4(fine_n + 1);
  for (int i = 0; i <= fine_n; ++i) fx[i] = range * double(i) / fine_n;
  auto integrand = [&cs](double s, double p) {
    return std::pow(s, 0.5 * (p - 2.0)) * std::sqrt(std::max(0.0, cs.dphi(s)));
  };
  theta2[0] = theta4[0] = 0.0;
  for (int i = 1; i <= fine_n; ++i) {
    double a = fx[i - 1], b = fx[i];
    theta2[i] = theta2[i - 1] + 0.5 * (b - a) * (integrand(a, 2) + integrand(b, 2));
    theta4[i] = theta4[i - 1] + 0.5 * (b - a) * (integrand(a, 4) + integrand(b, 4));
  }
  auto theta_at = [&](double x, int p) {
    double u = x / range * fine_n;
    int i = std::min(fine_n - 1, static_cast<int>(u));
    double t = u - i;
    const std::vector<double>& th = (p == 2) ? theta2 : theta4;
    return th[i] * (1.0 - t) + th[i + 1] * t;
  };

  {
    double c = 0.0;
    for (double x : xs) c = std::max(c, cs.phi(x) / (1.0 + std::pow(x, cs.m_growth)));
    add_item("phi_polynomial_growth", std::isfinite(c), c,
             "minimal c with phi(xi) <= c (1 + xi^m), m = " + std::to_string(cs.m_growth));
  }
  for (int p : {2, 4}) {
    double c = 0.0;
    for (double x : xs) {
      double bound = 1.0 + x + sq(theta_at(x, p));
      c = std::max(c, (std::abs(eval_or0(cs.nu, x)) + cs.dphi(x)) / bound);
    }
    add_item("theta_controls_drift_p" + std::to_string(p), std::isfinite(c), c,
             "minimal c with |nu| + phi' <= c (1 + xi + Theta^2)");
  }
  for (int p : {2, 4}) {
    // alternative A: xi^{-(p-2)/2} phi'(xi)^{-1/2} <= c xi^theta. the sup is
    // taken over the full grid and again away from the origin; a ratio much
    // greater than 1 means the constant diverges as xi -> 0 and no finite c
    // exists, however large the threshold.
    double bestA = 1e300, bestTheta = 0.0;
    bool okA = false;
    for (double th : {0.0, 0.25, 0.5}) {
      double c = 0.0, c_coarse = 0.0;
      for (double x : xs) {
        double lhs = std::pow(x, -0.5 * (p - 2.0)) / std::sqrt(std::max(1e-300, cs.dphi(x)));
        double ratio = lhs / std::pow(x, th);
        c = std::max(c, ratio);
        if (x >= 1e-4) c_coarse = std::max(c_coarse, ratio);
      }
      bool feas = std::isfinite(c) && c <= 10.0 * std::max(1e-300, c_coarse);
      if (feas && c < bestA) {
        bestA = c;
        bestTheta = th;
        okA = true;
      } else if (!okA && c < bestA) {
        bestA = c;
        bestTheta = th;
      }
    }
    // alternative B: |xi - xi'|^q <= c |Theta(xi) - Theta(xi')|^2, with the
    // same near-origin divergence test over pair subsets
    double bestB = 1e300;
    int bestQ = 0;
    bool okB = false;
    int stride = std::max(1, n_samples / 72);
    for (int q : {1, 2, 4}) {
      double c = 0.0, c_coarse = 0.0;
      for (std::size_t i = 0; i < xs.size(); i += stride)
        for (std::size_t j = i + stride; j < xs.size(); j += stride) {
          double dth = theta_at(xs[j], p) - theta_at(xs[i], p);
          if (dth == 0.0) continue;
          double ratio = std::pow(xs[j] - xs[i], q) / sq(dth);
          c = std::max(c, ratio);
          if (xs[j] - xs[i] >= 1e-4) c_coarse = std::max(c_coarse, ratio);
        }
      bool feas = std::isfinite(c) && c <= 10.0 * std::max(1e-300, c_coarse);
      if (feas && c < bestB) {
        bestB = c;
        bestQ = q;
        okB = true;
      } else if (!okB && c < bestB) {
        bestB = c;
        bestQ = q;
      }
    }
    std::string note = okA ? ("alternative A holds, theta = " + std::to_string(bestTheta) +
                              ", c = " + std::to_string(bestA))
                           : "alternative A infeasible";
    note += okB ? ("; alternative B holds, q = " + std::to_string(bestQ) +
                   ", c = " + std::to_string(bestB))
                : "; alternative B infeasible";
    double margin = (okA && okB) ? std::min(bestA, bestB)
                                 : (okA ? bestA : (okB ? bestB : std::min(bestA, bestB)));
    add_item("theta_inverse_or_pair_p" + std::to_string(p), okA || okB, margin, note);
  }
  {
    double c2 = 0.0, c4 = 0.0;
    for (double x : xs) {
      double s2 = sq(eval_or0(cs.sigma, x));
      c2 = std::max(c2, s2 / (1.0 + x + sq(theta_at(x, 2))));
      c4 = std::max(c4, x * x * s2 / (1.0 + x + sq(theta_at(x, 4))));
    }
    add_item("sigma_sq_theta_p2", std::isfinite(c2), c2,
             "minimal c with sigma^2 <= c (1 + xi + Theta_2^2)");
    add_item("sigma_sq_theta_p4", std::isfinite(c4), c4,
             "minimal c with xi^2 sigma^2 <= c (1 + xi + Theta_4^2)");
  }
  for (int p : {2, 4}) {
    const double delta0 = 0.01;
    double c = 0.0;
    for (double x : xs) {
      if (x <= delta0) continue;
      double sp = eval_or0(cs.dsigma, x), sv = eval_or0(cs.sigma, x);
      double lhs = sq(sq(sp)) / std::max(1e-300, cs.dphi(x)) + sq(sv * sp) + cs.dphi(x);
      c = std::max(c, lhs / (1.0 + x + sq(theta_at(x, p))));
    }
    add_item("sigma_composite_p" + std::to_string(p), std::isfinite(c), c,
             "minimal c_delta on (0.01, range] for sigma'^4/phi' + (sigma sigma')^2 + phi'");
  }

  // --- drift family --------------------------------------------------------
  {
    double L = 0.0;
    bool have_f = static_cast<bool>(cs.f);
    if (have_f) {
      int stride = std::max(1, n_samples / 72);
      for (std::size_t i = 0; i < xs.size(); i += stride)
        for (std::size_t j = i + stride; j < xs.size(); j += stride) {
          double dxi = xs[j] - xs[i];
          if (dxi == 0.0) continue;
          L = std::max(L, -(cs.f(xs[j]) - cs.f(xs[i])) * dxi / sq(dxi));
        }
    }
    add_item("f_one_sided_lipschitz", L <= cs.f_lip + 1e-9, cs.f_lip - L,
             have_f ? "declared Lip(f) minus the sampled one-sided constant"
                    : "f absent, trivially satisfied");
    double slack = 1e300;
    if (have_f) {
      for (double x : xs) slack = std::min(slack, cs.f_lip * (1.0 + x) - std::abs(cs.f(x)));
      double z = std::abs(cs.f(0.0));
      add_item("f_zero", z <= 1e-12, z, "|f(0)|, must vanish");
    } else {
      slack = 0.0;
      add_item("f_zero", true, 0.0, "f absent");
    }
    add_item("f_linear_growth", slack >= -1e-12, slack,
             "min of Lip(f)(1+xi) - |f(xi)| over the range");
  }
  {
    if (cs.B) {
      // probe the nonlocal drift on a fixed family of smooth state pairs
      Grid g = make_grid(1, 64);
      double c = 0.0;
      for (int trial = 0; trial < 4; ++trial) {
        InitialData d1{"random_smooth", 1.0, 0.6, 3, 100u + trial};
        InitialData d2{"random_smooth", 1.0, 0.6, 3, 200u + trial};
        State a = make_initial(g, d1), b = make_initial(g, d2);
        std::vector<double> Ba, Bb;
        cs.B(a, Ba);
        cs.B(b, Bb);
        double num = 0.0;
        for (int i = 0; i < g.n; ++i) {
          num = std::max(num, std::abs(Ba[i] - Bb[i]));
          double da = (Ba[(i + 1) % g.n] - Ba[i]) / g.h, db = (Bb[(i + 1) % g.n] - Bb[i]) / g.h;
          num = std::max(num, std::abs(da - db));
        }
        c = std::max(c, num / std::max(1e-300, l1_distance(a, b)));
      }
      add_item("B_lipschitz", c <= cs.B_lip * (1.0 + 1e-6) + 1e-12, cs.B_lip - c,
               "declared Lip(B) minus the probed L1 -> W^{1,inf} constant");
    } else {
      add_item("B_lipschitz", true, 0.0, "B absent, trivially satisfied");
    }
  }

  // --- gradient family -----------------------------------------------------
  {
    double c1 = 1e300;
    for (double x : xs) c1 = std::min(c1, cs.dphi(x) - 0.5 * F1_eff * sq(eval_or0(cs.dsigma, x)));
    c1 = std::min(c1, cs.dphi(0.0) - 0.5 * F1_eff * sq(eval_or0(cs.dsigma, 0.0)));
    rep.coercivity_c1 = c1;
    add_item("stochastic_coercivity", c1 > 0.0, c1,
             "min of phi' - (F1_eff/2) sigma'^2; positive means coercive");
  }
  {
    double c = 0.0;
    bool have2 = static_cast<bool>(cs.d2phi) || static_cast<bool>(cs.d2sigma);
    for (double x : xs) {
      double lhs = std::abs(eval_or0(cs.d2sigma, x)) + std::abs(eval_or0(cs.d2phi, x));
      c = std::max(c, lhs * sq(1.0 + cs.phi(x)));
    }
    add_item("second_derivative_decay", std::isfinite(c), c,
             have2 ? "minimal c with |sigma''| + |phi''| <= c (1 + phi)^{-2}"
                   : "second derivatives absent, treated as 0");
  }

  auto ok = [&rep](const std::string& id) {
    const AssumptionItem* it = rep.find(id);
    return it && it->satisfied;
  };
  rep.well_posed = ok("derivative_consistency") && ok("phi_zero") && ok("phi_increasing") &&
                   ok("sigma_origin_limit") && ok("sigma_running_sup") && ok("nu_running_sup") &&
                   ok("phi_polynomial_growth") && ok("theta_controls_drift_p2") &&
                   ok("theta_inverse_or_pair_p2") && ok("sigma_sq_theta_p2") &&
                   ok("sigma_composite_p2") && ok("f_one_sided_lipschitz") && ok("f_zero") &&
                   ok("f_linear_growth") && ok("B_lipschitz");
  rep.gradient_ok = ok("stochastic_coercivity") && ok("second_derivative_decay");
  return rep;
}

double invert_phi(const CoefficientSet& cs, double v) {
  if (!cs.phi) fail("invert_phi: phi is not set");
  if (v == 0.0) return 0.0;
  double sign = (v < 0.0) ? -1.0 : 1.0;
  double a = std::abs(v);
  double hi = 1.0;
  int guard = 0;
  while (cs.phi(hi) < a) {
    hi *= 2.0;
    if (++guard > 200) fail("invert_phi: phi does not reach the requested value");
  }
  double lo = 0.0;
  while (hi - lo > 1e-12) {
    double mid = 0.5 * (lo + hi);
    if (cs.phi(mid) < a)
      lo = mid;
    else
      hi = mid;
    if (++guard > 400) break;
  }
  return sign * 0.5 * (lo + hi);
}

}  // namespace spde
