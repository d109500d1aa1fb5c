#include "spde/solver.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <mutex>

namespace spde {

namespace {

// FFTW's planner mutates global state; executions on private buffers are fine
std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

// direct solver for (I - c Lap_h) x = r on the periodic 1-d grid:
// constant-coefficient cyclic tridiagonal via Sherman-Morrison with a
// precomputed Thomas factorization. exact (to rounding) and allocation-free
// per solve.
class CyclicHeat1D {
 public:
  void setup(int n, double c) {
    n_ = n;
    double alpha = -c, d = 1.0 + 2.0 * c;
    gamma_ = -d;
    diag_.assign(n, d);
    diag_[0] = d - gamma_;
    diag_[n - 1] = d - alpha * alpha / gamma_;
    alpha_ = alpha;
    // forward elimination ratios for the constant tridiagonal
    cp_.assign(n, 0.0);
    double beta = diag_[0];
    cp_[0] = alpha / beta;
    inv_.assign(n, 1.0 / beta);
    for (int i = 1; i < n; ++i) {
      beta = diag_[i] - alpha * cp_[i - 1];
      cp_[i] = alpha / beta;
      inv_[i] = 1.0 / beta;
    }
    // z solves T z = u with u = (gamma, 0, ..., 0, alpha)
    z_.assign(n, 0.0);
    y_.assign(n, 0.0);
    std::vector<double> u(n, 0.0);
    u[0] = gamma_;
    u[n - 1] = alpha;
    thomas(u.data(), z_.data());
    vz_ = 1.0 + z_[0] + (alpha / gamma_) * z_[n - 1];
    if (vz_ == 0.0) fail("CyclicHeat1D: singular correction (unexpected)");
  }

  void solve(const double* r, double* x) {
    thomas(r, y_.data());
    double fac = (y_[0] + (alpha_ / gamma_) * y_[n_ - 1]) / vz_;
    for (int i = 0; i < n_; ++i) x[i] = y_[i] - fac * z_[i];
  }

 private:
  void thomas(const double* r, double* out) {
    out[0] = r[0] * inv_[0];
    for (int i = 1; i < n_; ++i) out[i] = (r[i] - alpha_ * out[i - 1]) * inv_[i];
    for (int i = n_ - 2; i >= 0; --i) out[i] -= cp_[i] * out[i + 1];
  }

  int n_ = 0;
  double alpha_ = 0.0, gamma_ = 0.0, vz_ = 0.0;
  std::vector<double> diag_, cp_, inv_, z_, y_;
};

// spectral solver for (I - c Lap_h) on the periodic 2-d grid (the discrete
// five-point symbol, so it inverts exactly the same operator as the FD
// scheme). plans are per-instance, guarded creation, FFTW_ESTIMATE for
// deterministic plan choice.
class SpectralHeat2D {
 public:
  ~SpectralHeat2D() { release(); }

  void setup(int n, double c, double h) {
    release();
    n_ = n;
    std::lock_guard<std::mutex> lk(fftw_mutex());
    real_ = fftw_alloc_real(static_cast<std::size_t>(n) * n);
    spec_ = fftw_alloc_complex(static_cast<std::size_t>(n) * (n / 2 + 1));
    fwd_ = fftw_plan_dft_r2c_2d(n, n, real_, spec_, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_c2r_2d(n, n, spec_, real_, FFTW_ESTIMATE);
    if (!fwd_ || !bwd_) fail("SpectralHeat2D: plan creation failed");
    mult_.resize(static_cast<std::size_t>(n) * (n / 2 + 1));
    double tau = 6.283185307179586476925287;
    for (int j = 0; j < n; ++j)
      for (int i = 0; i <= n / 2; ++i) {
        double mu = (2.0 - 2.0 * std::cos(tau * i / n) + 2.0 - 2.0 * std::cos(tau * j / n)) /
                    (h * h);
        mult_[static_cast<std::size_t>(j) * (n / 2 + 1) + i] =
            1.0 / ((1.0 + c * mu) * n * double(n));
      }
  }

  void solve(const double* r, double* x) {
    std::size_t nn = static_cast<std::size_t>(n_) * n_;
    std::memcpy(real_, r, nn * sizeof(double));
    fftw_execute(fwd_);
    std::size_t ns = static_cast<std::size_t>(n_) * (n_ / 2 + 1);
    for (std::size_t k = 0; k < ns; ++k) {
      spec_[k][0] *= mult_[k];
      spec_[k][1] *= mult_[k];
    }
    fftw_execute(bwd_);
    std::memcpy(x, real_, nn * sizeof(double));
  }

 private:
  void release() {
    if (fwd_ || bwd_ || real_ || spec_) {
      std::lock_guard<std::mutex> lk(fftw_mutex());
      if (fwd_) fftw_destroy_plan(fwd_);
      if (bwd_) fftw_destroy_plan(bwd_);
      if (real_) fftw_free(real_);
      if (spec_) fftw_free(spec_);
      fwd_ = bwd_ = nullptr;
      real_ = nullptr;
      spec_ = nullptr;
    }
  }

  int n_ = 0;
  fftw_plan fwd_ = nullptr, bwd_ = nullptr;
  double* real_ = nullptr;
  fftw_complex* spec_ = nullptr;
  std::vector<double> mult_;
};

struct StepperDiag {
  std::int64_t limiter_hits = 0;
  double mass_repair_max = 0.0;
};

// the per-run integrator: precomputes mode-at-face tables, the implicit
// factorization and scratch buffers once, then advances allocation-free.
class Stepper {
 public:
  Stepper(const Grid& g, const CoefficientSet& cs, const NoisePath& path,
          const std::string& scheme_opt)
      : g_(g), cs_(cs), path_(path), dt_(path.dt()) {
    if (path.basis().dim != g.dim)
      fail("solve: noise basis dimension does not match the grid");
    use_noise_ = static_cast<bool>(cs.sigma) && cs.epsilon > 0.0 && path.basis().n_modes() > 0;
    sqrt_eps_ = std::sqrt(std::max(0.0, cs.epsilon));

    std::string scheme = scheme_opt.empty() ? "auto" : scheme_opt;
    if (scheme == "auto") scheme = cs.phi_id_plus_lip ? "semi_implicit" : "explicit";
    if (scheme != "semi_implicit" && scheme != "explicit")
      fail("solve: unknown scheme '" + scheme + "'");
    semi_ = (scheme == "semi_implicit");
    if (semi_ && !cs.phi_id_plus_lip)
      fail("solve: semi_implicit requires Phi = identity + bounded-slope remainder");
    if (!cs.phi || !cs.dphi) fail("solve: coefficient set lacks phi/dphi");
    if (cs.f_lip * dt_ > 1.0)
      fail("solve: dt * Lip(f) = " + std::to_string(cs.f_lip * dt_) +
           " > 1 breaks reaction positivity; reduce dt");

    // implicit weight: a >= (1 + sup psi')/2 gives unconditional stability
    // for an explicit remainder with slope range [0, sup psi']
    a_ = semi_ ? std::max(1.0, 0.5 * (1.0 + cs.psi_slope_max)) : 0.0;
    // the explicit diffusion remainder psi_a = Phi - a id vanishes only when
    // the implicit solve absorbs the identity exactly
    skip_psi_ = semi_ && cs.phi_is_identity && a_ == 1.0;

    n_ = g.n;
    h_ = g.h;
    cells_ = g.cells;
    hv_ = (g.dim == 1) ? h_ : h_ * h_;

    if (semi_) {
      if (g.dim == 1)
        heat1d_.setup(n_, a_ * dt_ / (h_ * h_));
      else
        heat2d_.setup(n_, a_ * dt_, h_);
    }

    if (use_noise_) {
      const NoiseBasis& nb = path.basis();
      J_ = nb.n_modes();
      dW_.resize(static_cast<std::size_t>(J_) * g.dim);
      if (g.dim == 1) {
        ex_.resize(static_cast<std::size_t>(J_) * n_);
        double x[2] = {0.0, 0.0};
        for (int j = 0; j < J_; ++j)
          for (int i = 0; i < n_; ++i) {
            x[0] = i * h_;
            ex_[static_cast<std::size_t>(j) * n_ + i] =
                nb.modes[j].lambda * mode_eval(nb.modes[j], 1, x);
          }
        wx_.resize(n_);
      } else {
        ex_.resize(static_cast<std::size_t>(J_) * cells_);
        ey_.resize(static_cast<std::size_t>(J_) * cells_);
        double x[2];
        for (int j = 0; j < J_; ++j)
          for (int jj = 0; jj < n_; ++jj)
            for (int ii = 0; ii < n_; ++ii) {
              std::size_t c = static_cast<std::size_t>(jj) * n_ + ii;
              x[0] = ii * h_;
              x[1] = (jj + 0.5) * h_;
              ex_[static_cast<std::size_t>(j) * cells_ + c] =
                  nb.modes[j].lambda * mode_eval(nb.modes[j], 2, x);
              x[0] = (ii + 0.5) * h_;
              x[1] = jj * h_;
              ey_[static_cast<std::size_t>(j) * cells_ + c] =
                  nb.modes[j].lambda * mode_eval(nb.modes[j], 2, x);
            }
        wx_.resize(cells_);
        wy_.resize(cells_);
      }
    }

    psi_.resize(cells_);
    ax_.resize(cells_);
    theta_.resize(cells_);
    scratch_.resize(cells_);
    if (g.dim == 2) ay_.resize(cells_);
    if (cs.B) bfield_.reserve(cells_ * g.dim);
  }

  bool semi_implicit() const { return semi_; }
  double implicit_weight() const { return a_; }

  // advance rho (in place) by one step consuming increments at absolute
  // index n_abs; diag accumulates limiter and repair statistics
  void advance(std::vector<double>& rho, std::int64_t n_abs, StepperDiag& diag) {
    if (g_.dim == 1)
      advance1d(rho, n_abs, diag);
    else
      advance2d(rho, n_abs, diag);
  }

 private:
  void mix_noise(std::int64_t n_abs) {
    for (int j = 0; j < J_; ++j)
      for (int c = 0; c < g_.dim; ++c)
        dW_[static_cast<std::size_t>(j) * g_.dim + c] = path_.increment(j, c, n_abs);
    if (g_.dim == 1) {
      std::fill(wx_.begin(), wx_.end(), 0.0);
      for (int j = 0; j < J_; ++j) {
        double w = dW_[j];
        const double* row = &ex_[static_cast<std::size_t>(j) * n_];
        for (int i = 0; i < n_; ++i) wx_[i] += row[i] * w;
      }
    } else {
      std::fill(wx_.begin(), wx_.end(), 0.0);
      std::fill(wy_.begin(), wy_.end(), 0.0);
      for (int j = 0; j < J_; ++j) {
        double wxj = dW_[static_cast<std::size_t>(j) * 2];
        double wyj = dW_[static_cast<std::size_t>(j) * 2 + 1];
        const double* rx = &ex_[static_cast<std::size_t>(j) * cells_];
        const double* ry = &ey_[static_cast<std::size_t>(j) * cells_];
        for (std::int64_t c = 0; c < cells_; ++c) {
          wx_[c] += rx[c] * wxj;
          wy_[c] += ry[c] * wyj;
        }
      }
    }
  }

  // donor-cell limiter on the assembled face amounts: no cell may lose more
  // mass in one step than it holds. influx reductions only help neighbors,
  // so one pass suffices for exact nonnegativity of the flux update.
  void limit_faces1d(const std::vector<double>& rho, StepperDiag& diag) {
    for (int i = 0; i < n_; ++i) {
      double out = std::max(ax_[(i + 1) % n_], 0.0) + std::max(-ax_[i], 0.0);
      double cap = rho[i] * h_;
      theta_[i] = (out > cap) ? cap / out : 1.0;
      if (theta_[i] < 1.0) ++diag.limiter_hits;
    }
    for (int i = 0; i < n_; ++i) {
      int donor = (ax_[i] >= 0.0) ? (i + n_ - 1) % n_ : i;
      ax_[i] *= theta_[donor];
    }
  }

  void advance1d(std::vector<double>& rho, std::int64_t n_abs, StepperDiag& diag) {
    const bool have_nu = static_cast<bool>(cs_.nu);
    const bool have_B = static_cast<bool>(cs_.B);
    if (use_noise_) mix_noise(n_abs);

    if (!skip_psi_) {
      double max_dphi = 0.0;
      for (int i = 0; i < n_; ++i) {
        psi_[i] = cs_.phi(rho[i]) - a_ * rho[i];
        if (!semi_) max_dphi = std::max(max_dphi, cs_.dphi(rho[i]));
      }
      if (!semi_ && dt_ * 2.0 * max_dphi > h_ * h_ * (1.0 + 1e-12))
        fail("solve: explicit diffusion stability violated at step " + std::to_string(n_abs) +
             ": dt * 2 * max phi' = " + std::to_string(dt_ * 2.0 * max_dphi) +
             " exceeds h^2 = " + std::to_string(h_ * h_));
    }

    if (have_B) {
      State view;  // shallow snapshot for the nonlocal drift
      view.grid = g_;
      view.rho = rho;
      cs_.B(view, bfield_);
    }

    double max_dnu = 0.0;
    const double dth = dt_ / h_;
    for (int i = 0; i < n_; ++i) {
      int im1 = (i + n_ - 1) % n_;
      double amt = 0.0;
      if (!skip_psi_) amt -= dth * (psi_[i] - psi_[im1]);
      if (have_nu || use_noise_) {
        double rf = 0.5 * (rho[im1] + rho[i]);
        if (have_nu) {
          amt += dt_ * cs_.nu(rf);
          max_dnu = std::max(max_dnu, std::abs(cs_.dnu(rf)));
        }
        if (use_noise_) amt += sqrt_eps_ * cs_.sigma(rf) * wx_[i];
      }
      if (have_B) amt += dt_ * 0.5 * (bfield_[im1] + bfield_[i]);
      ax_[i] = amt;
    }
    if (have_nu && max_dnu * dt_ > h_ * (1.0 + 1e-12))
      fail("solve: advection CFL violated at step " + std::to_string(n_abs) +
           ": dt * max|nu'| = " + std::to_string(max_dnu * dt_) + " exceeds h");

    limit_faces1d(rho, diag);

    double floor_scale = 1e-14 * std::max(1.0, *std::max_element(rho.begin(), rho.end()));
    for (int i = 0; i < n_; ++i) {
      double v = rho[i] - (ax_[(i + 1) % n_] - ax_[i]) / h_;
      if (v < 0.0) {
        if (v < -floor_scale)
          fail("solve: limiter invariant violated at step " + std::to_string(n_abs) +
               " (cell value " + std::to_string(v) + "); this is a bug");
        v = 0.0;
      }
      scratch_[i] = v;
    }

    if (cs_.f) {
      for (int i = 0; i < n_; ++i) {
        double v = scratch_[i] - dt_ * cs_.f(scratch_[i]);
        if (v < 0.0) {
          if (v < -floor_scale)
            fail("solve: reaction drove a cell negative at step " + std::to_string(n_abs) +
                 "; the configured f is incompatible with positivity at this dt");
          v = 0.0;
        }
        scratch_[i] = v;
      }
    }

    if (semi_) {
      double target = pairwise_sum(scratch_);
      heat1d_.solve(scratch_.data(), rho.data());
      repair(rho, target, n_abs, diag);
    } else {
      std::copy(scratch_.begin(), scratch_.end(), rho.begin());
    }
  }

  void limit_faces2d(const std::vector<double>& rho, StepperDiag& diag) {
    for (int j = 0; j < n_; ++j)
      for (int i = 0; i < n_; ++i) {
        std::size_t c = static_cast<std::size_t>(j) * n_ + i;
        std::size_t cxp = static_cast<std::size_t>(j) * n_ + (i + 1) % n_;
        std::size_t cyp = static_cast<std::size_t>((j + 1) % n_) * n_ + i;
        double out = std::max(ax_[cxp], 0.0) + std::max(-ax_[c], 0.0) +
                     std::max(ay_[cyp], 0.0) + std::max(-ay_[c], 0.0);
        double cap = rho[c] * h_;
        theta_[c] = (out > cap) ? cap / out : 1.0;
        if (theta_[c] < 1.0) ++diag.limiter_hits;
      }
    for (int j = 0; j < n_; ++j)
      for (int i = 0; i < n_; ++i) {
        std::size_t c = static_cast<std::size_t>(j) * n_ + i;
        std::size_t cxm = static_cast<std::size_t>(j) * n_ + (i + n_ - 1) % n_;
        std::size_t cym = static_cast<std::size_t>((j + n_ - 1) % n_) * n_ + i;
        ax_[c] *= theta_[ax_[c] >= 0.0 ? cxm : c];
        ay_[c] *= theta_[ay_[c] >= 0.0 ? cym : c];
      }
  }

  void advance2d(std::vector<double>& rho, std::int64_t n_abs, StepperDiag& diag) {
    const bool have_nu = static_cast<bool>(cs_.nu);
    if (cs_.B) fail("solve: nonlocal drift B is implemented for d=1 only");
    if (use_noise_) mix_noise(n_abs);

    if (!skip_psi_) {
      double max_dphi = 0.0;
      for (std::int64_t c = 0; c < cells_; ++c) {
        psi_[c] = cs_.phi(rho[c]) - a_ * rho[c];
        if (!semi_) max_dphi = std::max(max_dphi, cs_.dphi(rho[c]));
      }
      if (!semi_ && dt_ * 4.0 * max_dphi > h_ * h_ * (1.0 + 1e-12))
        fail("solve: explicit diffusion stability violated at step " + std::to_string(n_abs));
    }

    double max_dnu = 0.0;
    const double dth = dt_ / h_;
    for (int j = 0; j < n_; ++j)
      for (int i = 0; i < n_; ++i) {
        std::size_t c = static_cast<std::size_t>(j) * n_ + i;
        std::size_t cxm = static_cast<std::size_t>(j) * n_ + (i + n_ - 1) % n_;
        std::size_t cym = static_cast<std::size_t>((j + n_ - 1) % n_) * n_ + i;
        double amtx = 0.0, amty = 0.0;
        if (!skip_psi_) {
          amtx -= dth * (psi_[c] - psi_[cxm]);
          amty -= dth * (psi_[c] - psi_[cym]);
        }
        if (have_nu || use_noise_) {
          double rfx = 0.5 * (rho[cxm] + rho[c]);
          double rfy = 0.5 * (rho[cym] + rho[c]);
          if (have_nu) {
            amtx += dt_ * cs_.nu(rfx);
            amty += dt_ * cs_.nu(rfy);
            max_dnu = std::max(max_dnu, std::max(std::abs(cs_.dnu(rfx)), std::abs(cs_.dnu(rfy))));
          }
          if (use_noise_) {
            amtx += sqrt_eps_ * cs_.sigma(rfx) * wx_[c];
            amty += sqrt_eps_ * cs_.sigma(rfy) * wy_[c];
          }
        }
        ax_[c] = amtx;
        ay_[c] = amty;
      }
    if (have_nu && max_dnu * dt_ * 2.0 > h_ * (1.0 + 1e-12))
      fail("solve: advection CFL violated at step " + std::to_string(n_abs));

    limit_faces2d(rho, diag);

    double floor_scale = 1e-14 * std::max(1.0, *std::max_element(rho.begin(), rho.end()));
    for (int j = 0; j < n_; ++j)
      for (int i = 0; i < n_; ++i) {
        std::size_t c = static_cast<std::size_t>(j) * n_ + i;
        std::size_t cxp = static_cast<std::size_t>(j) * n_ + (i + 1) % n_;
        std::size_t cyp = static_cast<std::size_t>((j + 1) % n_) * n_ + i;
        double v = rho[c] - (ax_[cxp] - ax_[c]) / h_ - (ay_[cyp] - ay_[c]) / h_;
        if (v < 0.0) {
          if (v < -floor_scale)
            fail("solve: limiter invariant violated at step " + std::to_string(n_abs));
          v = 0.0;
        }
        scratch_[c] = v;
      }

    if (cs_.f) {
      for (std::int64_t c = 0; c < cells_; ++c) {
        double v = scratch_[c] - dt_ * cs_.f(scratch_[c]);
        if (v < 0.0) {
          if (v < -floor_scale)
            fail("solve: reaction drove a cell negative at step " + std::to_string(n_abs));
          v = 0.0;
        }
        scratch_[c] = v;
      }
    }

    if (semi_) {
      double target = pairwise_sum(scratch_);
      heat2d_.solve(scratch_.data(), rho.data());
      repair(rho, target, n_abs, diag);
    } else {
      std::copy(scratch_.begin(), scratch_.end(), rho.begin());
    }
  }

  // the implicit solve is an M-matrix inverse: negatives can only be
  // rounding. clamp them and restore the pre-solve cell sum exactly
  // (multiplicative to rounding scale, then the leftover ulps go into the
  // largest cell so the recomputed pairwise sum matches bitwise).
  void repair(std::vector<double>& rho, double target, std::int64_t n_abs, StepperDiag& diag) {
    double mx = 0.0;
    for (double v : rho) mx = std::max(mx, std::abs(v));
    double floor_scale = 1e-10 * std::max(1.0, mx);
    for (double& v : rho)
      if (v < 0.0) {
        if (v < -floor_scale)
          fail("solve: implicit solve produced a structurally negative value at step " +
               std::to_string(n_abs) + "; this is a bug");
        v = 0.0;
      }
    double now = pairwise_sum(rho);
    if (now > 0.0 && target > 0.0) {
      double ratio = target / now;
      diag.mass_repair_max = std::max(diag.mass_repair_max, std::abs(ratio - 1.0));
      if (std::abs(ratio - 1.0) > 1e-10)
        fail("solve: conservation drift " + std::to_string(ratio - 1.0) +
             " in the implicit solve at step " + std::to_string(n_abs) + "; this is a bug");
      for (double& v : rho) v *= ratio;
      std::size_t big = 0;
      for (std::size_t i = 1; i < rho.size(); ++i)
        if (rho[i] > rho[big]) big = i;
      // usually exits on the first pass; gives up quietly when the last ulp
      // is unreachable from this cell's granularity
      for (int pass = 0; pass < 8; ++pass) {
        double diff = target - pairwise_sum(rho);
        if (diff == 0.0) break;
        double nudged = rho[big] + diff;
        if (!(nudged > 0.0) || nudged == rho[big]) break;
        rho[big] = nudged;
      }
    }
  }

  Grid g_;
  const CoefficientSet& cs_;
  const NoisePath& path_;
  double dt_ = 0.0, sqrt_eps_ = 0.0, a_ = 0.0;
  bool semi_ = false, skip_psi_ = false, use_noise_ = false;
  int n_ = 0, J_ = 0;
  std::int64_t cells_ = 0;
  double h_ = 0.0, hv_ = 0.0;

  CyclicHeat1D heat1d_;
  SpectralHeat2D heat2d_;
  std::vector<double> psi_, ax_, ay_, theta_, scratch_, bfield_;
  std::vector<double> ex_, ey_, dW_, wx_, wy_;
};

void record_series(SaveSeries& s, const Grid& g, const std::vector<double>& rho, double t,
                   const CoefficientSet& cs) {
  double hv = (g.dim == 1) ? g.h : g.h * g.h;
  std::size_t nc = rho.size();
  std::vector<double> tmp(nc);

  s.t.push_back(t);
  s.mass.push_back(hv * pairwise_sum(rho));

  for (std::size_t i = 0; i < nc; ++i)
    tmp[i] = (rho[i] > 0.0) ? rho[i] * std::log(rho[i]) + 0.36787944117144233 : 0.36787944117144233;
  s.psi1.push_back(hv * pairwise_sum(tmp));

  // Dirichlet integrals over faces
  double psi2 = 0.0, gphi = 0.0;
  int n = g.n;
  if (g.dim == 1) {
    for (int i = 0; i < n; ++i) {
      int im1 = (i + n - 1) % n;
      psi2 += sq(std::sqrt(rho[i]) - std::sqrt(rho[im1]));
      gphi += sq(cs.phi(rho[i]) - cs.phi(rho[im1]));
    }
    psi2 /= g.h;
    gphi /= g.h;
  } else {
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        std::size_t c = static_cast<std::size_t>(j) * n + i;
        std::size_t cxm = static_cast<std::size_t>(j) * n + (i + n - 1) % n;
        std::size_t cym = static_cast<std::size_t>((j + n - 1) % n) * n + i;
        double sr = std::sqrt(rho[c]);
        double pr = cs.phi(rho[c]);
        psi2 += sq(sr - std::sqrt(rho[cxm])) + sq(sr - std::sqrt(rho[cym]));
        gphi += sq(pr - cs.phi(rho[cxm])) + sq(pr - cs.phi(rho[cym]));
      }
    // face-difference quotients squared times cell volume: hv / h^2 = 1
  }
  s.psi2.push_back(psi2);
  s.grad_phi_sq.push_back(gphi);

  if (cs.sigma) {
    for (std::size_t i = 0; i < nc; ++i) tmp[i] = sq(cs.sigma(rho[i]));
    s.sigma2_l1.push_back(hv * pairwise_sum(tmp));
  } else {
    s.sigma2_l1.push_back(0.0);
  }
  if (cs.nu) {
    for (std::size_t i = 0; i < nc; ++i) tmp[i] = std::abs(cs.nu(rho[i]));
    s.nu_l1.push_back(hv * pairwise_sum(tmp));
  } else {
    s.nu_l1.push_back(0.0);
  }
  if (cs.f) {
    for (std::size_t i = 0; i < nc; ++i) tmp[i] = cs.f(rho[i]);
    s.f_rate.push_back(hv * pairwise_sum(tmp));
  } else {
    s.f_rate.push_back(0.0);
  }
  double mn = rho[0], mx = rho[0];
  for (double v : rho) {
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  s.min_rho.push_back(mn);
  s.max_rho.push_back(mx);
}

}  // namespace

Trajectory solve(const State& rho0, double s, double T, const CoefficientSet& cs,
                 const NoisePath& path, const SolveOptions& opt) {
  if (!(path.dt() > 0.0)) fail("solve: path has no time step");
  const double dt = path.dt();
  std::int64_t s_step = steps_of(s, dt, "start time s");
  std::int64_t t_step = steps_of(T, dt, "end time T");
  if (t_step <= s_step) fail("solve: need T > s");
  if (rho0.grid.cells != static_cast<std::int64_t>(rho0.rho.size()))
    fail("solve: state size does not match its grid");
  for (double v : rho0.rho)
    if (!(v >= 0.0)) fail("solve: initial data must be nonnegative and finite");

  std::int64_t total = t_step - s_step;
  std::int64_t stride = opt.save_every;
  if (stride <= 0) stride = std::max<std::int64_t>(1, total / 512);

  Trajectory out;
  out.grid = rho0.grid;
  out.dt = dt;
  out.s_step = s_step;
  out.t_step = t_step;

  Stepper st(rho0.grid, cs, path, opt.scheme);
  out.scheme_used = st.semi_implicit() ? "semi_implicit" : "explicit";
  out.implicit_weight = st.implicit_weight();

  StepperDiag diag;
  std::vector<double> rho = rho0.rho;

  auto want_save = [&](std::int64_t k) {
    if (k == 0 || k == total) return true;
    std::int64_t idx = opt.align_saves_absolute ? (s_step + k) : k;
    return idx % stride == 0;
  };

  for (std::int64_t k = 0; k <= total; ++k) {
    if (want_save(k)) {
      double t = (s_step + k) * dt;
      record_series(out.series, rho0.grid, rho, t, cs);
      if (opt.store_states) {
        State snap;
        snap.grid = rho0.grid;
        snap.time = t;
        snap.rho = rho;
        out.states.push_back(std::move(snap));
      }
    }
    if (k < total) st.advance(rho, s_step + k, diag);
  }

  out.limiter_hits = diag.limiter_hits;
  out.mass_repair_max = diag.mass_repair_max;
  out.final_state.grid = rho0.grid;
  out.final_state.time = t_step * dt;
  out.final_state.rho = std::move(rho);
  return out;
}

State step(const State& state, const CoefficientSet& cs, const NoisePath& path, std::int64_t n,
           const SolveOptions& opt) {
  Stepper st(state.grid, cs, path, opt.scheme);
  StepperDiag diag;
  State out = state;
  st.advance(out.rho, n, diag);
  out.time = state.time + path.dt();
  return out;
}

double mass_balance_residual(const Trajectory& traj) {
  const SaveSeries& s = traj.series;
  if (s.t.size() < 2) return 0.0;
  double worst = 0.0, acc = 0.0;
  for (std::size_t k = 1; k < s.t.size(); ++k) {
    acc += 0.5 * (s.t[k] - s.t[k - 1]) * (s.f_rate[k] + s.f_rate[k - 1]);
    worst = std::max(worst, std::abs(s.mass[k] - s.mass[0] + acc));
  }
  return worst;
}

std::vector<double> gradient_functional(const Trajectory& traj, double p) {
  if (!(p >= 2.0)) fail("gradient_functional: need p >= 2");
  std::vector<double> out(traj.series.grad_phi_sq.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::pow(traj.series.grad_phi_sq[i] + 1.0, 0.5 * p);
  return out;
}

}  // namespace spde
