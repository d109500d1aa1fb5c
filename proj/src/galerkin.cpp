#include "spde/galerkin.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "spde/util.hpp"

namespace spde {

namespace {

constexpr double kTau = 6.283185307179586476925287;
constexpr double kSqrt2 = 1.4142135623730950488;
constexpr double kEntropyShift = 0.36787944117144233;  // 1/e

// orthonormal solution family on the unit torus: index 0 is the constant 1,
// then per wavenumber m the pair sqrt(2) sin(tau m x), sqrt(2) cos(tau m x)
struct SolutionBasis {
  int n_coeff = 0;
  std::vector<double> mu;  // Laplacian eigenvalues (tau m)^2
  std::vector<double> e;   // values at cell centers, row per member
  std::vector<double> de;  // first derivatives, row per member

  SolutionBasis(int max_wave, const Grid& g) {
    n_coeff = 2 * max_wave + 1;
    mu.assign(n_coeff, 0.0);
    e.assign(static_cast<std::size_t>(n_coeff) * g.n, 0.0);
    de.assign(static_cast<std::size_t>(n_coeff) * g.n, 0.0);
    for (int i = 0; i < g.n; ++i) e[i] = 1.0;
    for (int m = 1; m <= max_wave; ++m) {
      double w = kTau * m;
      int ks = 2 * m - 1, kc = 2 * m;
      mu[ks] = mu[kc] = w * w;
      for (int i = 0; i < g.n; ++i) {
        double x = (i + 0.5) * g.h;
        e[static_cast<std::size_t>(ks) * g.n + i] = kSqrt2 * std::sin(w * x);
        de[static_cast<std::size_t>(ks) * g.n + i] = kSqrt2 * w * std::cos(w * x);
        e[static_cast<std::size_t>(kc) * g.n + i] = kSqrt2 * std::cos(w * x);
        de[static_cast<std::size_t>(kc) * g.n + i] = -kSqrt2 * w * std::sin(w * x);
      }
    }
  }
};

double eval_or0(const ScalarFn& f, double x) { return f ? f(x) : 0.0; }

}  // namespace

Trajectory solve_galerkin(const State& rho0, double T, const CoefficientSet& cs,
                          const NoisePath& path, int n_modes,
                          const SolveOptions& opt) {
  const Grid& g = rho0.grid;
  if (g.dim != 1) fail("solve_galerkin: spectral solver is one dimensional");
  if (static_cast<std::int64_t>(rho0.rho.size()) != g.cells)
    fail("solve_galerkin: state size does not match its grid");
  if (n_modes < 1) fail("solve_galerkin: need at least one resolved wavenumber");
  if (2 * n_modes >= g.n)
    fail("solve_galerkin: 2*n_modes must be below n, the cell-center grid "
         "cannot represent the Nyquist cosine");
  if (!cs.phi || !cs.dphi) fail("solve_galerkin: coefficient set lacks phi/dphi");
  const NoiseBasis& nb = path.basis();
  if (nb.dim != 1) fail("solve_galerkin: noise basis dimension does not match the grid");

  const double dt = path.dt();
  if (!(dt > 0.0)) fail("solve_galerkin: path has no time step");
  const std::int64_t total = steps_of(T, dt, "end time T");
  if (total < 1) fail("solve_galerkin: need T >= dt");

  const int n = g.n;
  const double h = g.h;
  const SolutionBasis sb(n_modes, g);
  const int N = sb.n_coeff;

  const bool use_noise = static_cast<bool>(cs.sigma) && cs.epsilon > 0.0 && nb.n_modes() > 0;
  const double sqrt_eps = std::sqrt(std::max(0.0, cs.epsilon));
  const int J = nb.n_modes();

  // noise member values scaled by lambda, plus the pointwise sums entering
  // the quadratic variation: S0 = sum lambda^2 e^2, S1 = sum lambda^2 e e',
  // S2 = sum lambda^2 e'^2
  std::vector<double> ne(static_cast<std::size_t>(J) * n, 0.0);
  std::vector<double> s0(n, 0.0), s1(n, 0.0), s2(n, 0.0);
  for (int j = 0; j < J; ++j) {
    const NoiseMode& m = nb.modes[j];
    for (int i = 0; i < n; ++i) {
      double x = (i + 0.5) * h, dv = 0.0;
      double v = mode_eval(m, 1, &x);
      mode_grad(m, 1, &x, &dv);
      ne[static_cast<std::size_t>(j) * n + i] = m.lambda * v;
      s0[i] += m.lambda * m.lambda * v * v;
      s1[i] += m.lambda * m.lambda * v * dv;
      s2[i] += m.lambda * m.lambda * dv * dv;
    }
  }

  // initial coefficients of v = Phi(rho0)
  std::vector<double> c(N, 0.0), scratch(n);
  for (int i = 0; i < n; ++i) scratch[i] = cs.phi(rho0.rho[i]);
  for (int k = 0; k < N; ++k) {
    const double* ek = &sb.e[static_cast<std::size_t>(k) * n];
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += ek[i] * scratch[i];
    c[k] = h * acc;
  }

  Trajectory out;
  out.grid = g;
  out.dt = dt;
  out.s_step = 0;
  out.t_step = total;
  out.scheme_used = "galerkin_lawson_euler";
  out.implicit_weight = 1.0;

  std::int64_t stride = opt.save_every;
  if (stride <= 0) stride = std::max<std::int64_t>(1, total / 512);

  // pointwise work buffers
  std::vector<double> v(n), vp(n), vpp(n), rho(n), alpha(n), beta(n);
  std::vector<double> drift(n), react(n), w(n), tend(N);
  State cur;
  cur.grid = g;
  cur.rho.assign(n, 0.0);
  std::vector<double> bfield;

  auto evaluate_fields = [&]() {
    std::fill(v.begin(), v.end(), 0.0);
    std::fill(vp.begin(), vp.end(), 0.0);
    std::fill(vpp.begin(), vpp.end(), 0.0);
    for (int k = 0; k < N; ++k) {
      double ck = c[k];
      if (ck == 0.0) continue;
      const double* ek = &sb.e[static_cast<std::size_t>(k) * n];
      const double* dk = &sb.de[static_cast<std::size_t>(k) * n];
      double mk = sb.mu[k];
      for (int i = 0; i < n; ++i) {
        v[i] += ck * ek[i];
        vp[i] += ck * dk[i];
        vpp[i] -= ck * mk * ek[i];
      }
    }
    double amin = 1e300, amax = -1e300;
    for (int i = 0; i < n; ++i) {
      rho[i] = cs.phi_is_identity ? v[i] : invert_phi(cs, v[i]);
      double sign = rho[i] < 0.0 ? -1.0 : 1.0;
      double ar = std::abs(rho[i]);
      alpha[i] = cs.dphi(ar);
      if (!(alpha[i] > 0.0))
        fail("solve_galerkin: Phi' must stay positive, got " + std::to_string(alpha[i]));
      beta[i] = cs.d2phi ? sign * cs.d2phi(ar) * (vp[i] / alpha[i]) : 0.0;
      amin = std::min(amin, alpha[i]);
      amax = std::max(amax, alpha[i]);
    }
    return 0.5 * (amin + amax);
  };

  auto record = [&](std::int64_t step) {
    SaveSeries& s = out.series;
    s.t.push_back(step * dt);
    std::vector<double> cell(n);
    for (int i = 0; i < n; ++i) cell[i] = rho[i];
    double hv = h;
    double msum = 0.0, p1 = 0.0, p2 = 0.0, gp = 0.0, s2l = 0.0, nul = 0.0, fr = 0.0;
    double mn = cell[0], mx = cell[0];
    for (int i = 0; i < n; ++i) {
      double r = cell[i], rp = std::max(0.0, r);
      msum += r;
      p1 += (rp > 0.0 ? rp * std::log(rp) : 0.0) + kEntropyShift;
      double rl = std::max(0.0, cell[(i + n - 1) % n]);
      double d = std::sqrt(rp) - std::sqrt(rl);
      p2 += d * d;
      double dphi = v[i] - v[(i + n - 1) % n];
      gp += dphi * dphi;
      s2l += sq(eval_or0(cs.sigma, std::abs(r)));
      nul += std::abs(eval_or0(cs.nu, r));
      fr += eval_or0(cs.f, r);
      mn = std::min(mn, r);
      mx = std::max(mx, r);
    }
    s.mass.push_back(hv * msum);
    s.psi1.push_back(hv * p1);
    s.psi2.push_back(p2 / h);
    s.grad_phi_sq.push_back(gp / h);
    s.sigma2_l1.push_back(hv * s2l);
    s.nu_l1.push_back(hv * nul);
    s.f_rate.push_back(hv * fr);
    s.min_rho.push_back(mn);
    s.max_rho.push_back(mx);
    if (opt.store_states) {
      State snap;
      snap.grid = g;
      snap.time = step * dt;
      snap.rho = cell;
      out.states.push_back(std::move(snap));
    }
  };

  std::vector<double> noise_tend(N, 0.0);
  for (std::int64_t nstep = 0; nstep <= total; ++nstep) {
    double a = evaluate_fields();
    if (nstep == 0 || nstep == total || nstep % stride == 0) record(nstep);
    if (nstep == total) break;

    // pointwise drift pieces: the flux part multiplies grad(e_k Phi'), the
    // cell part multiplies e_k directly
    bool have_nu = static_cast<bool>(cs.nu);
    bool have_b = static_cast<bool>(cs.B);
    if (have_b) {
      cur.time = nstep * dt;
      for (int i = 0; i < n; ++i) cur.rho[i] = rho[i];
      cs.B(cur, bfield);
      if (static_cast<int>(bfield.size()) != n)
        fail("solve_galerkin: drift field size mismatch");
    }
    for (int i = 0; i < n; ++i) {
      double flux = have_nu ? cs.nu(rho[i]) : 0.0;
      if (have_b) flux += bfield[i];
      drift[i] = flux;
      double rp = vp[i] / alpha[i];
      double q = 0.0;
      if (use_noise && cs.d2phi) {
        double sv = eval_or0(cs.sigma, std::abs(rho[i]));
        double sp = eval_or0(cs.dsigma, std::abs(rho[i]));
        q = sp * sp * rp * rp * s0[i] + 2.0 * sv * sp * rp * s1[i] + sv * sv * s2[i];
        double sign = rho[i] < 0.0 ? -1.0 : 1.0;
        q *= 0.5 * cs.epsilon * sign * cs.d2phi(std::abs(rho[i]));
      }
      react[i] = alpha[i] * eval_or0(cs.f, rho[i]) - q;
    }
    if (use_noise) {
      std::fill(w.begin(), w.end(), 0.0);
      for (int j = 0; j < J; ++j) {
        double inc = path.increment(j, 0, nstep);
        const double* nej = &ne[static_cast<std::size_t>(j) * n];
        for (int i = 0; i < n; ++i) w[i] += inc * nej[i];
      }
    }

    for (int k = 0; k < N; ++k) {
      const double* ek = &sb.e[static_cast<std::size_t>(k) * n];
      const double* dk = &sb.de[static_cast<std::size_t>(k) * n];
      double acc = 0.0, nacc = 0.0;
      for (int i = 0; i < n; ++i) {
        // testing -Phi' div(F) against e_k moves the gradient onto
        // e_k Phi'(rho), so every transported flux pairs with
        // alpha e_k' + beta e_k
        double weight = alpha[i] * dk[i] + beta[i] * ek[i];
        double cellv = (alpha[i] - a) * vpp[i] - react[i];
        acc += ek[i] * cellv + weight * drift[i];
        if (use_noise) nacc += weight * eval_or0(cs.sigma, std::abs(rho[i])) * w[i];
      }
      tend[k] = h * acc;
      noise_tend[k] = sqrt_eps * h * nacc;
    }
    for (int k = 0; k < N; ++k)
      c[k] = std::exp(-a * sb.mu[k] * dt) * (c[k] + dt * tend[k] + noise_tend[k]);
  }

  State fin;
  fin.grid = g;
  fin.time = T;
  fin.rho = rho;
  out.final_state = std::move(fin);
  return out;
}

}  // namespace spde
