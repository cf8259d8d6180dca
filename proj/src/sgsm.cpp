#include "scarbasis/sgsm.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>

#include "scarbasis/errors.hpp"
#include "scarbasis/spline.hpp"
#include "scarbasis/units.hpp"

namespace scarbasis {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Quadrature resolution for the phase-space count.
constexpr int kWeylNr = 512;
constexpr int kWeylNth = 512;

// A candidate whose orthogonal component drops below this norm is treated
// as linearly dependent on the selection and excluded permanently.
constexpr double kDependenceTol = 1e-6;

// Scores within this relative distance count as tied; the lower pool index
// wins, which keeps the selection deterministic.
constexpr double kTieRel = 1e-12;

// Configuration-space table for the phase-space count: the potential on the
// quadrature grid plus the per-row momentum factor sqrt(2 mu / b(r)), so
// counts at many energies reuse one sweep over the surface.
struct WeylTable {
  std::vector<double> v;     // row i: kWeylNth values over theta in [0, pi]
  std::vector<double> wfac;  // sqrt(2 mu / b(r_i))
  double cell = 0.0;         // dr dth / (4 pi hbar^2)
};

WeylTable weyl_table(const PesModel& pes) {
  WeylTable t;
  const double dr = (pes.r_hi() - pes.r_lo()) / kWeylNr;
  const double dth = M_PI / kWeylNth;
  t.v.resize(size_t(kWeylNr) * kWeylNth);
  t.wfac.resize(kWeylNr);
  const double mu = pes.mass_r();
  for (int i = 0; i < kWeylNr; ++i) {
    const double r = pes.r_lo() + (i + 0.5) * dr;
    t.wfac[i] = std::sqrt(2.0 * mu / pes.b(r));
    for (int j = 0; j < kWeylNth; ++j)
      t.v[size_t(i) * kWeylNth + j] = pes.value(r, (j + 0.5) * dth);
  }
  t.cell = dr * dth / (4.0 * M_PI * hbar * hbar);
  return t;
}

double count_from_table(const WeylTable& t, double e) {
  double acc = 0.0;
  for (int i = 0; i < kWeylNr; ++i) {
    double row = 0.0;
    const double* v = &t.v[size_t(i) * kWeylNth];
    for (int j = 0; j < kWeylNth; ++j) {
      const double gap = e - v[j];
      if (gap > 0.0) row += gap;
    }
    acc += row * t.wfac[i];
  }
  return acc * t.cell;
}

void require_rho(const SelectionParams& params) {
  if (!params.rho)
    throw ConfigError("selection parameters carry no density-of-states model");
}

double positive_rho(const SelectionParams& params, double e) {
  const double d = params.rho(e);
  if (!(d > 0.0) || !std::isfinite(d)) {
    std::ostringstream msg;
    msg << "density of states is not positive at E = " << to_cm1(e)
        << " cm^-1 (got " << d << ")";
    throw ConfigError(msg.str());
  }
  return d;
}

// Quadrature-weighted real view of a grid state: dot products of these
// vectors equal the grid inner product.
VectorXd weighted_real(const Wavefunction& wf) {
  const double w = std::sqrt(wf.grid.dr() * wf.grid.dth());
  VectorXd v(wf.grid.size());
  for (int k = 0; k < wf.grid.size(); ++k) v(k) = wf.amp[k].real() * w;
  return v;
}

Wavefunction from_weighted(const VectorXd& v, const GridSpec& g) {
  const double w = 1.0 / std::sqrt(g.dr() * g.dth());
  Wavefunction wf(g);
  for (int k = 0; k < g.size(); ++k) wf.amp[k] = v(k) * w;
  return wf;
}

// Rotate a state by the global phase that concentrates it on the real
// axis, then fix the sign of the dominant component. States that stay
// materially complex after the rotation are rejected: the Hamiltonian
// assembly downstream is real-symmetric by construction.
void align_phase(Wavefunction& wf, int pool_index) {
  std::complex<double> s = 0.0;
  for (const auto& a : wf.amp) s += a * a;
  const std::complex<double> rot =
      std::polar(1.0, -0.5 * std::arg(s));
  double re2 = 0.0, im2 = 0.0;
  size_t kmax = 0;
  double amax = -1.0;
  for (size_t k = 0; k < wf.amp.size(); ++k) {
    wf.amp[k] *= rot;
    re2 += wf.amp[k].real() * wf.amp[k].real();
    im2 += wf.amp[k].imag() * wf.amp[k].imag();
    if (std::abs(wf.amp[k].real()) > amax) {
      amax = std::abs(wf.amp[k].real());
      kmax = k;
    }
  }
  if (im2 > 1e-6 * (re2 + im2)) {
    std::ostringstream msg;
    msg << "pool state " << pool_index
        << " is not real up to a global phase (imaginary fraction "
        << im2 / (re2 + im2) << ")";
    throw ConfigError(msg.str());
  }
  const double sign = wf.amp[kmax].real() < 0.0 ? -1.0 : 1.0;
  for (auto& a : wf.amp) a = sign * a.real();
  wf.normalize();
}

}  // namespace

double weyl_count(const PesModel& pes, double e) {
  return count_from_table(weyl_table(pes), e);
}

std::function<double(double)> density_model(const PesModel& pes, double e_lo,
                                            double e_hi, int n_nodes) {
  if (!(e_hi > e_lo))
    throw ConfigError("density model needs an increasing energy range");
  if (n_nodes < 8) throw ConfigError("density model needs at least 8 nodes");

  const WeylTable table = weyl_table(pes);
  std::vector<double> x(n_nodes), y(n_nodes);
  for (int i = 0; i < n_nodes; ++i) {
    x[i] = e_lo + (e_hi - e_lo) * i / (n_nodes - 1);
    y[i] = count_from_table(table, x[i]);
  }
  CubicSpline fit(x, y);
  for (int i = 0; i < 2 * n_nodes - 1; ++i) {
    const double xi = e_lo + (e_hi - e_lo) * i / (2.0 * (n_nodes - 1));
    if (!(fit.deriv(xi) > 0.0)) {
      std::ostringstream msg;
      msg << "state count is not increasing at E = " << to_cm1(xi)
          << " cm^-1; move the density range above the potential floor";
      throw NumericError(msg.str());
    }
  }
  // Frozen at the range ends: callers may probe slightly outside, where the
  // extrapolated cubic is not trustworthy.
  return [fit, e_lo, e_hi](double e) {
    return fit.deriv(std::clamp(e, e_lo, e_hi));
  };
}

double selection_parameter(const LocalizedState& state,
                           const SelectionParams& params) {
  require_rho(params);
  if (state.sigma_cm1 < 0.0)
    throw ConfigError("selection needs a non-negative dispersion");
  const double sigma = from_cm1(state.sigma_cm1);
  const double excess = std::max(0.0, state.e_n - params.e_ref);
  return positive_rho(params, state.e_n) * std::hypot(sigma, excess);
}

int basis_size(const PesModel& pes, const SelectionParams& params,
               const std::vector<LocalizedState>& pool) {
  require_rho(params);
  if (pool.empty()) throw ConfigError("candidate pool is empty");
  double sigma_sc = params.sigma_sc;
  if (!(sigma_sc > 0.0)) {
    std::vector<double> s;
    s.reserve(pool.size());
    for (const auto& c : pool) s.push_back(from_cm1(c.sigma_cm1));
    std::sort(s.begin(), s.end());
    const size_t n = s.size();
    sigma_sc = n % 2 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
  }
  if (!(sigma_sc > 0.0))
    throw ConfigError("dispersion scale for the basis-size formula is zero");
  const double n_real = weyl_count(pes, params.e_ref + 2.0 * sigma_sc) +
                        params.c_b * sigma_sc * positive_rho(params, params.e_ref);
  const int n_b = int(std::lround(n_real));
  if (n_b < 1)
    throw ConfigError("selection window admits no states; raise e_ref");
  if (size_t(n_b) > pool.size()) {
    std::ostringstream msg;
    msg << "basis size " << n_b << " exceeds the candidate pool ("
        << pool.size() << "); include more (longer) periodic orbits";
    throw ConfigError(msg.str());
  }
  return n_b;
}

BasisSelection select_basis(const std::vector<LocalizedState>& pool,
                            const SelectionParams& params,
                            const PesModel& pes) {
  require_rho(params);
  if (pool.empty()) throw ConfigError("candidate pool is empty");

  BasisSelection sel;
  sel.pool = pool;
  for (size_t j = 0; j < sel.pool.size(); ++j) {
    LocalizedState& c = sel.pool[j];
    if (c.wf.amp.empty() || !c.wf.grid.same_as(sel.pool[0].wf.grid)) {
      std::ostringstream msg;
      msg << "pool state " << j << " does not live on the common grid";
      throw ConfigError(msg.str());
    }
    if (std::abs(c.wf.norm() - 1.0) > 1e-6) {
      std::ostringstream msg;
      msg << "pool state " << j << " is not normalized (norm "
          << c.wf.norm() << ")";
      throw ConfigError(msg.str());
    }
    const double window = params.e_ref + 2.0 * from_cm1(c.sigma_cm1);
    if (!(c.e_n < window)) {
      std::ostringstream msg;
      msg << "pool state " << j << " at " << to_cm1(c.e_n)
          << " cm^-1 lies outside the energy window ("
          << to_cm1(window) << " cm^-1)";
      throw ConfigError(msg.str());
    }
    align_phase(c.wf, int(j));
  }

  sel.eta.reserve(sel.pool.size());
  for (const auto& c : sel.pool)
    sel.eta.push_back(selection_parameter(c, params));

  const int n_b = params.n_b_override > 0 ? params.n_b_override
                                          : basis_size(pes, params, sel.pool);
  if (size_t(n_b) > sel.pool.size()) {
    std::ostringstream msg;
    msg << "basis size " << n_b << " exceeds the candidate pool ("
        << sel.pool.size() << "); include more (longer) periodic orbits";
    throw ConfigError(msg.str());
  }

  const GridSpec& g = sel.pool[0].wf.grid;
  std::vector<VectorXd> res;
  res.reserve(sel.pool.size());
  for (const auto& c : sel.pool) res.push_back(weighted_real(c.wf));

  std::vector<bool> out(sel.pool.size(), false);
  std::vector<VectorXd> aux;
  for (int k = 0; k < n_b; ++k) {
    // Exclude freshly dependent candidates, then take the survivor whose
    // orthogonal component is largest relative to its eta.
    int pick = -1;
    double best = 0.0, best_norm = 0.0;
    for (size_t j = 0; j < res.size(); ++j) {
      if (out[j]) continue;
      const double nrm = res[j].norm();
      if (nrm < kDependenceTol) {
        out[j] = true;
        continue;
      }
      const double score = nrm * nrm / sel.eta[j];
      if (pick < 0 || score > best * (1.0 + kTieRel)) {
        pick = int(j);
        best = score;
        best_norm = nrm;
      }
    }
    if (pick < 0) {
      std::ostringstream msg;
      msg << "selected " << k << " of " << n_b
          << " requested states; the remaining candidates are numerically "
             "dependent on the selection";
      sel.warning = msg.str();
      break;
    }

    VectorXd phi = res[pick] / best_norm;
    // One extra orthogonalization pass keeps the auxiliary set orthonormal
    // to 1e-10 even after hundreds of picks.
    for (const VectorXd& a : aux) phi -= a.dot(phi) * a;
    const double nrm2 = phi.norm();
    if (nrm2 < 0.5)
      throw NumericError("auxiliary function collapsed during "
                         "re-orthogonalization");
    phi /= nrm2;

    for (size_t j = 0; j < res.size(); ++j)
      if (!out[j]) res[j] -= phi.dot(res[j]) * phi;

    sel.selected.push_back(pick);
    sel.residual_norm.push_back(best_norm);
    aux.push_back(std::move(phi));
    out[pick] = true;
  }

  for (size_t a = 0; a < aux.size(); ++a)
    for (size_t b = 0; b <= a; ++b) {
      const double want = a == b ? 1.0 : 0.0;
      if (std::abs(aux[a].dot(aux[b]) - want) > 1e-10)
        throw NumericError("auxiliary basis lost orthonormality");
    }

  sel.aux.reserve(aux.size());
  for (const VectorXd& a : aux) sel.aux.push_back(from_weighted(a, g));
  return sel;
}

EigenResult assemble_and_diagonalize(const BasisSelection& sel,
                                     const PesModel& pes,
                                     const SelectionParams& params,
                                     Parity parity) {
  require_rho(params);
  const int n = int(sel.aux.size());
  if (n < 1) throw ConfigError("selection holds no auxiliary functions");

  for (int a = 0; a < n; ++a)
    for (int b = 0; b <= a; ++b) {
      const double want = a == b ? 1.0 : 0.0;
      if (std::abs(overlap(sel.aux[a], sel.aux[b]) -
                   std::complex<double>(want)) > 1e-10)
        throw NumericError("auxiliary basis is not orthonormal");
    }

  std::vector<Wavefunction> h_aux;
  h_aux.reserve(n);
  for (int b = 0; b < n; ++b)
    h_aux.push_back(apply_hamiltonian(sel.aux[b], pes));

  Eigen::MatrixXcd m(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) m(a, b) = overlap(sel.aux[a], h_aux[b]);

  const double imag_max = m.imag().cwiseAbs().maxCoeff();
  if (imag_max > 1e-6) {
    std::ostringstream msg;
    msg << "Hamiltonian matrix has imaginary elements up to " << imag_max
        << " hartree; quadrature trouble";
    throw NumericError(msg.str());
  }
  const MatrixXd re = m.real();
  const double asym = (re - re.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-6) {
    std::ostringstream msg;
    msg << "Hamiltonian matrix asymmetry " << asym
        << " hartree; quadrature trouble";
    throw NumericError(msg.str());
  }

  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (re + re.transpose()));
  if (es.info() != Eigen::Success)
    throw NumericError("basis Hamiltonian failed to diagonalize");

  EigenResult out;
  out.parity = parity;
  out.c = es.eigenvectors();
  for (int col = 0; col < n; ++col) {
    int imax = 0;
    for (int a = 1; a < n; ++a)
      if (std::abs(out.c(a, col)) > std::abs(out.c(imax, col))) imax = a;
    if (out.c(imax, col) < 0.0) out.c.col(col) = -out.c.col(col);
  }

  const GridSpec& g = sel.aux[0].grid;
  for (int col = 0; col < n; ++col) {
    const double e_ha = es.eigenvalues()(col);
    out.e.push_back(to_cm1(e_ha));
    Wavefunction psi(g);
    for (int a = 0; a < n; ++a) {
      const double c = out.c(a, col);
      for (int k = 0; k < g.size(); ++k) psi.amp[k] += c * sel.aux[a].amp[k];
    }
    psi.normalize();
    const EnergyMoments mom = energy_moments(psi, pes);
    out.sigma.push_back(to_cm1(mom.sigma));
    out.sigma_r.push_back(mom.sigma * positive_rho(params, e_ha));
  }
  return out;
}

}  // namespace scarbasis
