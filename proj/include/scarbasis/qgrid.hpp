#pragma once

// Discretized quantum mechanics on a 2D (R, theta) grid: frozen Gaussians,
// spectral Hamiltonian application, split-operator propagation, and the
// localized tube/scar states built on periodic orbits.
//
// Representation: R lives on a uniform periodic Fourier grid [r_min, r_max),
// theta on the midpoint cosine grid of [0, pi] (even-parity sector). Grid
// amplitudes are stored row-major with R fastest.

#include <complex>
#include <string>
#include <vector>

#include <scarbasis/pes.hpp>
#include <scarbasis/dynamics.hpp>
#include <scarbasis/porbit.hpp>

namespace scarbasis {

struct GridSpec {
  int n_r = 0;
  int n_th = 0;
  double r_min = 0.0, r_max = 0.0;
  double th_min = 0.0, th_max = M_PI;
  double hbar = 1.0;
  Masses masses; // metadata; kinetic coefficients always come from the PES

  double dr() const { return (r_max - r_min) / n_r; }
  double dth() const { return (th_max - th_min) / n_th; }
  double r(int i) const { return r_min + i * dr(); }
  double th(int j) const { return th_min + (j + 0.5) * dth(); }
  int size() const { return n_r * n_th; }

  bool same_as(const GridSpec& o) const;

  // Validating factory: sizes must be powers of two >= 32, and both spacings
  // must resolve the local de Broglie wavelength at e_ref with at least
  // 4 points per wavelength (momenta taken at the potential floor).
  static GridSpec create(int n_r, int n_th, double r_min, double r_max,
                         const PesModel& pes, double e_ref);
};

struct Wavefunction {
  GridSpec grid;
  std::vector<std::complex<double>> amp; // amp[j*n_r + i] = psi(r_i, th_j)

  Wavefunction() = default;
  explicit Wavefunction(const GridSpec& g)
      : grid(g), amp(static_cast<size_t>(g.size())) {}

  std::complex<double>& at(int i_r, int j_th) {
    return amp[static_cast<size_t>(j_th) * grid.n_r + i_r];
  }
  const std::complex<double>& at(int i_r, int j_th) const {
    return amp[static_cast<size_t>(j_th) * grid.n_r + i_r];
  }

  double norm() const;     // sqrt of the quadrature of |psi|^2
  void normalize();        // throws NumericError on vanishing norm
};

// Quadrature inner product <psi|phi> = dr dth sum conj(psi) phi.
std::complex<double> overlap(const Wavefunction& psi, const Wavefunction& phi);

// Unnormalized Gaussian wavepacket exp{-a_r (R-R_c)^2 - a_th (th-th_c)^2
// + (i/hbar)[P_R (R-R_c) + P_th (th-th_c)] + i gamma} symmetrized into the
// even sector: the centre is folded into [0, pi] (P_th flips sign with it)
// and the reflected images at -th_c and 2pi-th_c are added explicitly.
// The centre must stay at least 3 Gaussian widths away from the radial
// grid edges; violations raise ConfigError with the offending distances.
Wavefunction frozen_gaussian(const GridSpec& grid, const PhasePoint& z,
                             double alpha_r, double alpha_th, double gamma);

// H psi with spectral kinetic terms: P_R^2/(2 m_R) through the Fourier
// transform in R, b(R) P_th^2 through the cosine transform in theta with
// b applied pointwise in R, and V(R, theta) pointwise.
Wavefunction apply_hamiltonian(const Wavefunction& psi, const PesModel& pes);

// Largest time step keeping every kinetic phase per step below max_phase.
double suggest_time_step(const GridSpec& grid, const PesModel& pes,
                         double max_phase = 0.5);

// Strang-split propagation exp(-iV dt/2h) exp(-iT_R dt/h) exp(-iT_th dt/h)
// exp(-iV dt/2h) per step; each factor is exact in its own representation,
// so the norm is preserved to roundoff. Non-finite amplitudes abort with
// the offending step index.
Wavefunction propagate(const Wavefunction& psi, const PesModel& pes,
                       double dt, int n_steps);

enum class StateKind { tube, scar };

// Wavefunction localized on a periodic orbit, with its provenance.
struct LocalizedState {
  Wavefunction wf;
  StateKind kind = StateKind::tube;
  PeriodicOrbit po;
  std::string label;
  int n = 0;           // quantization index (metadata)
  double e_n = 0.0;    // quantized energy, hartree
  double h_mean_cm1 = 0.0;
  double sigma_cm1 = 0.0;
  double raw_norm = 0.0; // quadrature norm before normalization
  bool flagged = false;  // set by callers when sigma exceeds their cap
};

struct TubeOptions {
  double alpha_r = 16.114;  // a.u.^-2
  double alpha_th = 14.123; // rad^-2
  int n_samples = 128;      // starting quadrature count, doubled to tol
  int max_samples = 4096;
  double tol = 1e-6;
};

// Time average of the frozen Gaussian riding the orbit, each sample carrying
// the running phase S_t/hbar - mu_t pi/2. At a quantized energy the phase
// closes over the period and the average is constructive; between quantized
// energies it self-cancels, which raw_norm records. The quadrature doubles
// its sample count until the normalized state moves by less than tol.
LocalizedState tube_function(const PeriodicOrbit& po, int n, double e_n,
                             const PesModel& pes, const GridSpec& grid,
                             const TubeOptions& opt = {});

struct ScarParams {
  double lambda = 0.0;      // stability exponent, a.u.^-1
  double area = 0.0;        // characteristic section area, a.u. action
  double t_ehrenfest = 0.0; // window half-length, a.u.

  // t_ehrenfest = ln(area/hbar) / (2 lambda); rejects non-positive results.
  static ScarParams from(double lambda, double area, double hbar = 1.0);
};

// Cosine-windowed spectral filter of a tube state on an unstable orbit:
// integral over [-T_E, T_E] of cos(pi t/2T_E) exp(-i(H - E_n)t/hbar) psi.
// The backward branch reuses the forward propagator through conjugation.
LocalizedState scar_function(const LocalizedState& tube, const ScarParams& sp,
                             const PesModel& pes);

struct EnergyMoments {
  double mean = 0.0;  // hartree
  double sigma = 0.0; // hartree
};

// <H> and sqrt(<H^2> - <H>^2) by double application of the Hamiltonian.
// Requires a normalized state; a variance below -1e-10 is an error, tiny
// negatives are clamped to zero.
EnergyMoments energy_moments(const Wavefunction& psi, const PesModel& pes);

} // namespace scarbasis
