#include <scarbasis/qgrid.hpp>

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <memory>
#include <sstream>
#include <utility>

#include <scarbasis/errors.hpp>
#include <scarbasis/units.hpp>

namespace scarbasis {

namespace {

using Cplx = std::complex<double>;

// FFTW plans and the aligned scratch buffer for one grid shape. The complex
// FFT runs along the contiguous R axis in batches over theta; the cosine
// transforms run along theta by treating the interleaved re/im doubles as
// 2 n_r independent real series of stride 2 n_r.
class Workspace {
 public:
  Workspace(int n_r, int n_th) : n_r_(n_r), n_th_(n_th) {
    buf_ = fftw_alloc_complex(static_cast<size_t>(n_r) * n_th);
    if (!buf_) throw std::bad_alloc();
    fft_fwd_ = fftw_plan_many_dft(1, &n_r_, n_th_, buf_, nullptr, 1, n_r_,
                                  buf_, nullptr, 1, n_r_, FFTW_FORWARD,
                                  FFTW_ESTIMATE);
    fft_bwd_ = fftw_plan_many_dft(1, &n_r_, n_th_, buf_, nullptr, 1, n_r_,
                                  buf_, nullptr, 1, n_r_, FFTW_BACKWARD,
                                  FFTW_ESTIMATE);
    double* rb = reinterpret_cast<double*>(buf_);
    fftw_r2r_kind k10 = FFTW_REDFT10;
    fftw_r2r_kind k01 = FFTW_REDFT01;
    dct_fwd_ = fftw_plan_many_r2r(1, &n_th_, 2 * n_r_, rb, nullptr, 2 * n_r_,
                                  1, rb, nullptr, 2 * n_r_, 1, &k10,
                                  FFTW_ESTIMATE);
    dct_bwd_ = fftw_plan_many_r2r(1, &n_th_, 2 * n_r_, rb, nullptr, 2 * n_r_,
                                  1, rb, nullptr, 2 * n_r_, 1, &k01,
                                  FFTW_ESTIMATE);
    if (!fft_fwd_ || !fft_bwd_ || !dct_fwd_ || !dct_bwd_)
      throw NumericError("failed to prepare spectral transform plans");
  }
  ~Workspace() {
    fftw_destroy_plan(fft_fwd_);
    fftw_destroy_plan(fft_bwd_);
    fftw_destroy_plan(dct_fwd_);
    fftw_destroy_plan(dct_bwd_);
    fftw_free(buf_);
  }
  Workspace(const Workspace&) = delete;
  Workspace& operator=(const Workspace&) = delete;

  Cplx* buf() { return reinterpret_cast<Cplx*>(buf_); }
  void load(const std::vector<Cplx>& a) { std::copy(a.begin(), a.end(), buf()); }
  void store(std::vector<Cplx>& a) const {
    const Cplx* b = reinterpret_cast<const Cplx*>(buf_);
    std::copy(b, b + a.size(), a.begin());
  }
  void fft_fwd() { fftw_execute(fft_fwd_); }
  void fft_bwd() { fftw_execute(fft_bwd_); }
  void dct_fwd() { fftw_execute(dct_fwd_); }
  void dct_bwd() { fftw_execute(dct_bwd_); }

 private:
  int n_r_, n_th_;
  fftw_complex* buf_;
  fftw_plan fft_fwd_, fft_bwd_, dct_fwd_, dct_bwd_;
};

Workspace& workspace(const GridSpec& g) {
  static std::map<std::pair<int, int>, std::unique_ptr<Workspace>> cache;
  auto& slot = cache[{g.n_r, g.n_th}];
  if (!slot) slot = std::make_unique<Workspace>(g.n_r, g.n_th);
  return *slot;
}

// (hbar k)^2 / (2 m_R) on the unshifted FFT frequency layout.
std::vector<double> radial_kinetic(const GridSpec& g, const PesModel& pes) {
  std::vector<double> kr2(g.n_r);
  const double two_m = 2.0 * pes.mass_r();
  const double dk = 2.0 * M_PI / (g.r_max - g.r_min);
  for (int i = 0; i < g.n_r; ++i) {
    int f = i < g.n_r / 2 ? i : i - g.n_r;
    double k = dk * f;
    kr2[i] = g.hbar * g.hbar * k * k / two_m;
  }
  return kr2;
}

// (hbar m_eff)^2 per cosine index; the pointwise b(R) factor is separate.
std::vector<double> angular_kinetic(const GridSpec& g) {
  std::vector<double> m2(g.n_th);
  const double scale = M_PI / (g.th_max - g.th_min);
  for (int m = 0; m < g.n_th; ++m) {
    double k = g.hbar * scale * m;
    m2[m] = k * k;
  }
  return m2;
}

std::vector<double> b_of_r(const GridSpec& g, const PesModel& pes) {
  std::vector<double> b(g.n_r);
  for (int i = 0; i < g.n_r; ++i) b[i] = pes.b(g.r(i));
  return b;
}

// Accumulate weight * exp{-a_r dR^2 - a_th dth^2 + i(p dq)/hbar} with the
// centre folded into [0, pi] and its reflections through theta = 0 and
// theta = pi added, so the samples represent the smooth even-sector state.
void add_gaussian(Wavefunction& wf, const PhasePoint& z, double alpha_r,
                  double alpha_th, Cplx weight) {
  const GridSpec& g = wf.grid;
  double thc = std::fmod(z.th, 2.0 * M_PI);
  if (thc < 0) thc += 2.0 * M_PI;
  double pth = z.pth;
  if (thc > M_PI) {
    thc = 2.0 * M_PI - thc;
    pth = -pth;
  }

  const double w_r = 1.0 / std::sqrt(alpha_r);
  const double d_lo = z.R - g.r_min;
  const double d_hi = g.r_max - z.R;
  if (d_lo < 3.0 * w_r || d_hi < 3.0 * w_r) {
    std::ostringstream os;
    os << "wavepacket centre R = " << z.R
       << " sits too close to the radial grid edge: distances " << d_lo
       << " and " << d_hi << " a.u., need at least " << 3.0 * w_r;
    throw ConfigError(os.str());
  }

  std::vector<Cplx> f_r(g.n_r);
  for (int i = 0; i < g.n_r; ++i) {
    double x = g.r(i) - z.R;
    f_r[i] = std::exp(Cplx(-alpha_r * x * x, z.pR * x / g.hbar));
  }

  const double centre[3] = {thc, -thc, 2.0 * M_PI - thc};
  const double mom[3] = {pth, -pth, -pth};
  std::vector<Cplx> f_th(g.n_th, Cplx(0.0, 0.0));
  for (int im = 0; im < 3; ++im) {
    for (int j = 0; j < g.n_th; ++j) {
      double y = g.th(j) - centre[im];
      double a = -alpha_th * y * y;
      if (a > -46.0) f_th[j] += std::exp(Cplx(a, mom[im] * y / g.hbar));
    }
  }

  for (int j = 0; j < g.n_th; ++j) {
    Cplx wj = weight * f_th[j];
    Cplx* row = wf.amp.data() + static_cast<size_t>(j) * g.n_r;
    for (int i = 0; i < g.n_r; ++i) row[i] += wj * f_r[i];
  }
}

void check_radial_edges(const Wavefunction& wf, const char* what) {
  const GridSpec& g = wf.grid;
  double amax = 0.0, emax = 0.0;
  for (int j = 0; j < g.n_th; ++j) {
    for (int i = 0; i < g.n_r; ++i) {
      double a = std::abs(wf.at(i, j));
      amax = std::max(amax, a);
      if (i == 0 || i == g.n_r - 1) emax = std::max(emax, a);
    }
  }
  if (emax > 1e-8 * amax) {
    std::ostringstream os;
    os << what << " reaches the radial grid edge: edge amplitude " << emax
       << " exceeds 1e-8 of the peak " << amax;
    throw NumericError(os.str());
  }
}

// One Strang step: half potential kick, exact radial kinetic step in
// Fourier space, exact angular kinetic step in cosine space (diagonal per
// R column since b(R) commutes with P_theta), half potential kick.
class Propagator {
 public:
  Propagator(const GridSpec& g, const PesModel& pes, double dt)
      : g_(g), ws_(workspace(g)) {
    if (!(dt > 0)) throw ConfigError("time step must be positive");
    const Cplx mi(0.0, -1.0);
    const double h = g.hbar;
    exp_v_half_.resize(g.size());
    for (int j = 0; j < g.n_th; ++j)
      for (int i = 0; i < g.n_r; ++i)
        exp_v_half_[static_cast<size_t>(j) * g.n_r + i] =
            std::exp(mi * pes.value(g.r(i), g.th(j)) * dt / (2.0 * h));
    auto kr2 = radial_kinetic(g, pes);
    exp_t_r_.resize(g.n_r);
    for (int i = 0; i < g.n_r; ++i)
      exp_t_r_[i] = std::exp(mi * kr2[i] * dt / h) / double(g.n_r);
    auto m2 = angular_kinetic(g);
    auto b = b_of_r(g, pes);
    exp_t_th_.resize(g.size());
    for (int m = 0; m < g.n_th; ++m)
      for (int i = 0; i < g.n_r; ++i)
        exp_t_th_[static_cast<size_t>(m) * g.n_r + i] =
            std::exp(mi * b[i] * m2[m] * dt / h) / (2.0 * g.n_th);
  }

  void step(std::vector<Cplx>& a, int step_index) {
    ws_.load(a);
    Cplx* b = ws_.buf();
    const size_t n = a.size();
    for (size_t k = 0; k < n; ++k) b[k] *= exp_v_half_[k];
    ws_.fft_fwd();
    for (int j = 0; j < g_.n_th; ++j) {
      Cplx* row = b + static_cast<size_t>(j) * g_.n_r;
      for (int i = 0; i < g_.n_r; ++i) row[i] *= exp_t_r_[i];
    }
    ws_.fft_bwd();
    ws_.dct_fwd();
    for (size_t k = 0; k < n; ++k) b[k] *= exp_t_th_[k];
    ws_.dct_bwd();
    double nrm2 = 0.0;
    for (size_t k = 0; k < n; ++k) {
      b[k] *= exp_v_half_[k];
      nrm2 += std::norm(b[k]);
    }
    if (!std::isfinite(nrm2)) {
      std::ostringstream os;
      os << "propagation produced a non-finite amplitude at step "
         << step_index;
      throw NumericError(os.str());
    }
    ws_.store(a);
  }

 private:
  GridSpec g_;
  Workspace& ws_;
  std::vector<Cplx> exp_v_half_, exp_t_r_, exp_t_th_;
};

} // namespace

bool GridSpec::same_as(const GridSpec& o) const {
  return n_r == o.n_r && n_th == o.n_th && r_min == o.r_min &&
         r_max == o.r_max && th_min == o.th_min && th_max == o.th_max;
}

GridSpec GridSpec::create(int n_r, int n_th, double r_min, double r_max,
                          const PesModel& pes, double e_ref) {
  auto pow2 = [](int n) { return n >= 32 && (n & (n - 1)) == 0; };
  if (!pow2(n_r) || !pow2(n_th)) {
    std::ostringstream os;
    os << "grid sizes must be powers of two of at least 32, got " << n_r
       << " x " << n_th;
    throw ConfigError(os.str());
  }
  if (!(r_max > r_min)) throw ConfigError("empty radial range for the grid");

  GridSpec g;
  g.n_r = n_r;
  g.n_th = n_th;
  g.r_min = r_min;
  g.r_max = r_max;
  g.masses = pes.masses();

  double v_floor = std::numeric_limits<double>::infinity();
  for (int j = 0; j < n_th; ++j)
    for (int i = 0; i < n_r; ++i)
      v_floor = std::min(v_floor, pes.value(g.r(i), g.th(j)));
  if (!(e_ref > v_floor))
    throw ConfigError(
        "reference energy lies below the potential floor of the grid");

  const double kin = e_ref - v_floor;
  const double p_r = std::sqrt(2.0 * pes.mass_r() * kin);
  const double ppw_r = 2.0 * M_PI * g.hbar / p_r / g.dr();
  double b_min = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_r; ++i) b_min = std::min(b_min, pes.b(g.r(i)));
  const double p_th = std::sqrt(kin / b_min);
  const double ppw_th = 2.0 * M_PI * g.hbar / p_th / g.dth();
  if (ppw_r < 4.0 || ppw_th < 4.0) {
    std::ostringstream os;
    os << "grid too coarse at the reference energy: " << ppw_r
       << " radial and " << ppw_th
       << " angular points per de Broglie wavelength, need at least 4";
    throw ConfigError(os.str());
  }
  return g;
}

double Wavefunction::norm() const {
  double s = 0.0;
  for (const Cplx& a : amp) s += std::norm(a);
  return std::sqrt(s * grid.dr() * grid.dth());
}

void Wavefunction::normalize() {
  double n = norm();
  if (!(n > 1e-300))
    throw NumericError("cannot normalize a vanishing wavefunction");
  for (Cplx& a : amp) a /= n;
}

std::complex<double> overlap(const Wavefunction& psi, const Wavefunction& phi) {
  if (!psi.grid.same_as(phi.grid))
    throw ConfigError("overlap requires wavefunctions on the same grid");
  Cplx s(0.0, 0.0);
  for (size_t k = 0; k < psi.amp.size(); ++k)
    s += std::conj(psi.amp[k]) * phi.amp[k];
  return s * psi.grid.dr() * psi.grid.dth();
}

Wavefunction frozen_gaussian(const GridSpec& grid, const PhasePoint& z,
                             double alpha_r, double alpha_th, double gamma) {
  if (!(alpha_r > 0) || !(alpha_th > 0))
    throw ConfigError("Gaussian widths must be positive");
  if (grid.size() <= 0) throw ConfigError("empty grid");
  Wavefunction wf(grid);
  add_gaussian(wf, z, alpha_r, alpha_th, std::exp(Cplx(0.0, gamma)));
  return wf;
}

Wavefunction apply_hamiltonian(const Wavefunction& psi, const PesModel& pes) {
  const GridSpec& g = psi.grid;
  if (g.size() <= 0 || psi.amp.size() != static_cast<size_t>(g.size()))
    throw ConfigError("wavefunction does not match its grid");
  Workspace& ws = workspace(g);
  Wavefunction out(g);

  for (int j = 0; j < g.n_th; ++j)
    for (int i = 0; i < g.n_r; ++i)
      out.at(i, j) = pes.value(g.r(i), g.th(j)) * psi.at(i, j);

  auto kr2 = radial_kinetic(g, pes);
  ws.load(psi.amp);
  ws.fft_fwd();
  {
    Cplx* b = ws.buf();
    for (int j = 0; j < g.n_th; ++j) {
      Cplx* row = b + static_cast<size_t>(j) * g.n_r;
      for (int i = 0; i < g.n_r; ++i) row[i] *= kr2[i] / double(g.n_r);
    }
  }
  ws.fft_bwd();
  {
    const Cplx* b = ws.buf();
    for (size_t k = 0; k < out.amp.size(); ++k) out.amp[k] += b[k];
  }

  auto m2 = angular_kinetic(g);
  auto br = b_of_r(g, pes);
  ws.load(psi.amp);
  ws.dct_fwd();
  {
    Cplx* b = ws.buf();
    for (int m = 0; m < g.n_th; ++m) {
      Cplx* row = b + static_cast<size_t>(m) * g.n_r;
      for (int i = 0; i < g.n_r; ++i) row[i] *= m2[m] / (2.0 * g.n_th);
    }
  }
  ws.dct_bwd();
  {
    const Cplx* b = ws.buf();
    for (int j = 0; j < g.n_th; ++j)
      for (int i = 0; i < g.n_r; ++i)
        out.at(i, j) += br[i] * b[static_cast<size_t>(j) * g.n_r + i];
  }
  return out;
}

double suggest_time_step(const GridSpec& grid, const PesModel& pes,
                         double max_phase) {
  if (!(max_phase > 0)) throw ConfigError("phase bound must be positive");
  const double k_max = M_PI / grid.dr();
  const double t_r = grid.hbar * grid.hbar * k_max * k_max /
                     (2.0 * pes.mass_r());
  double b_max = 0.0;
  for (int i = 0; i < grid.n_r; ++i) b_max = std::max(b_max, pes.b(grid.r(i)));
  const double m_max =
      grid.hbar * (grid.n_th - 1) * M_PI / (grid.th_max - grid.th_min);
  const double t_th = b_max * m_max * m_max;
  return max_phase * grid.hbar / std::max(t_r, t_th);
}

Wavefunction propagate(const Wavefunction& psi, const PesModel& pes,
                       double dt, int n_steps) {
  if (n_steps < 0) throw ConfigError("negative step count");
  Propagator prop(psi.grid, pes, dt);
  Wavefunction out = psi;
  for (int s = 0; s < n_steps; ++s) prop.step(out.amp, s);
  return out;
}

LocalizedState tube_function(const PeriodicOrbit& po, int n, double e_n,
                             const PesModel& pes, const GridSpec& grid,
                             const TubeOptions& opt) {
  if (!(opt.alpha_r > 0) || !(opt.alpha_th > 0))
    throw ConfigError("Gaussian widths must be positive");
  const int k0 = std::max(128, opt.n_samples);
  if (opt.max_samples < 2 * k0)
    throw ConfigError("tube quadrature cap is below one doubling");

  // The orbit sampler may refine beyond the request to resolve the winding
  // angles, so convergence bookkeeping uses the count it actually delivered.
  auto build = [&](int K, Wavefunction& wf, double& raw) -> int {
    PoSampling s = sample_orbit(po, pes, K);
    const int kk = int(s.samples.size()) - 1;
    wf = Wavefunction(grid);
    const Cplx i1(0.0, 1.0);
    for (int k = 0; k < kk; ++k) {
      const FlowSample& fs = s.samples[k];
      double gamma =
          fs.action / grid.hbar - s.winding.mu_t[k] * (M_PI / 2.0);
      add_gaussian(wf, fs.z, opt.alpha_r, opt.alpha_th,
                   std::exp(i1 * gamma) / double(kk));
    }
    raw = wf.norm();
    return kk;
  };

  // Off-quantization averages cancel towards zero, so the doubling test
  // compares unnormalized states against the norm one Gaussian would have
  // alone; a vanishing average then converges instead of chasing the
  // direction of its own roundoff residue.
  const double g_ref =
      std::sqrt(M_PI / (2.0 * std::sqrt(opt.alpha_r * opt.alpha_th)));

  Wavefunction prev;
  double raw_prev = 0.0;
  int kk_prev = build(k0, prev, raw_prev);
  bool converged = false;
  double change = 0.0;
  for (int K = 2 * k0; K <= opt.max_samples; K *= 2) {
    Wavefunction cur;
    double raw_cur = 0.0;
    const int kk_cur = build(K, cur, raw_cur);
    if (kk_cur == kk_prev) continue;  // sampler had refined ahead of us
    double d2 = 0.0;
    for (size_t k = 0; k < cur.amp.size(); ++k)
      d2 += std::norm(prev.amp[k] - cur.amp[k]);
    change = std::sqrt(d2 * grid.dr() * grid.dth());
    prev = std::move(cur);
    raw_prev = raw_cur;
    kk_prev = kk_cur;
    if (change <= opt.tol * std::max(raw_prev, g_ref)) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    std::ostringstream os;
    os << "tube quadrature did not converge by " << opt.max_samples
       << " samples (last change " << change << ")";
    throw NumericError(os.str());
  }

  check_radial_edges(prev, "tube state");

  LocalizedState st;
  st.kind = StateKind::tube;
  st.po = po;
  st.label = po.label;
  st.n = n;
  st.e_n = e_n;
  st.raw_norm = raw_prev;
  prev.normalize();
  st.wf = std::move(prev);
  EnergyMoments m = energy_moments(st.wf, pes);
  st.h_mean_cm1 = to_cm1(m.mean);
  st.sigma_cm1 = to_cm1(m.sigma);
  return st;
}

ScarParams ScarParams::from(double lambda, double area, double hbar) {
  if (!(lambda > 0))
    throw ConfigError("scar window requires a positive stability exponent");
  if (!(area > 0) || !(hbar > 0))
    throw ConfigError("scar window requires a positive section area");
  ScarParams sp;
  sp.lambda = lambda;
  sp.area = area;
  sp.t_ehrenfest = std::log(area / hbar) / (2.0 * lambda);
  if (!(sp.t_ehrenfest > 0))
    throw ConfigError(
        "Ehrenfest window is not positive: section area must exceed hbar");
  return sp;
}

LocalizedState scar_function(const LocalizedState& tube, const ScarParams& sp,
                             const PesModel& pes) {
  if (tube.kind != StateKind::tube)
    throw ConfigError("scar construction starts from a tube state");
  if (tube.po.stable)
    throw ConfigError("scar construction requires an unstable orbit");
  if (!(sp.t_ehrenfest > 0))
    throw ConfigError("Ehrenfest window must be positive");

  const GridSpec& g = tube.wf.grid;
  const double dt0 = suggest_time_step(g, pes);
  const int n_steps = std::max(1, int(std::ceil(sp.t_ehrenfest / dt0)));
  const double dt = sp.t_ehrenfest / n_steps;
  Propagator prop(g, pes, dt);

  std::vector<Cplx> fwd = tube.wf.amp;
  std::vector<Cplx> bwd(fwd.size());
  for (size_t k = 0; k < fwd.size(); ++k) bwd[k] = std::conj(fwd[k]);

  Wavefunction acc = tube.wf; // t = 0 term, window weight 1
  const Cplx i1(0.0, 1.0);
  for (int j = 1; j <= n_steps; ++j) {
    prop.step(fwd, j);
    prop.step(bwd, j);
    const double t = j * dt;
    const double w = std::cos(M_PI * t / (2.0 * sp.t_ehrenfest)) *
                     (j == n_steps ? 0.5 : 1.0);
    const Cplx ph = std::exp(i1 * tube.e_n * t / g.hbar);
    for (size_t k = 0; k < acc.amp.size(); ++k)
      acc.amp[k] += w * (ph * fwd[k] + std::conj(ph * bwd[k]));
  }

  check_radial_edges(acc, "scar state");

  LocalizedState st;
  st.kind = StateKind::scar;
  st.po = tube.po;
  st.label = tube.label;
  st.n = tube.n;
  st.e_n = tube.e_n;
  // The dt measure makes this the norm of the actual time integral, stable
  // against the step count the grid happened to demand.
  st.raw_norm = dt * acc.norm();
  acc.normalize();
  st.wf = std::move(acc);
  EnergyMoments m = energy_moments(st.wf, pes);
  st.h_mean_cm1 = to_cm1(m.mean);
  st.sigma_cm1 = to_cm1(m.sigma);
  return st;
}

EnergyMoments energy_moments(const Wavefunction& psi, const PesModel& pes) {
  const double nn = psi.norm();
  if (std::abs(nn - 1.0) > 1e-6)
    throw ConfigError("energy moments require a normalized state");
  Wavefunction h = apply_hamiltonian(psi, pes);
  const double mean = std::real(overlap(psi, h));
  Wavefunction h2 = apply_hamiltonian(h, pes);
  const double second = std::real(overlap(psi, h2));
  double var = second - mean * mean;
  if (var < -1e-10) {
    std::ostringstream os;
    os << "energy variance came out negative: " << var;
    throw NumericError(os.str());
  }
  EnergyMoments m;
  m.mean = mean;
  m.sigma = std::sqrt(std::max(var, 0.0));
  return m;
}

} // namespace scarbasis
