#pragma once

// Basis selection and diagonalization in a pool of orbit-localized states.
// A greedy loop picks, at each step, the candidate whose component
// orthogonal to the already-selected span is largest relative to its
// selection parameter eta = rho(E) * sqrt(sigma^2 + dE^2); the picked
// residuals, orthonormalized, form the auxiliary basis in which the
// Hamiltonian is assembled and diagonalized.
//
// Inputs are hartree throughout: candidate energies, e_ref, and the
// argument of rho(E), which returns states per hartree. Only the final
// EigenResult reports energies and dispersions in cm^-1; the relative
// dispersion sigma_r is dimensionless either way.

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include <scarbasis/pes.hpp>
#include <scarbasis/qgrid.hpp>
#include <scarbasis/refsolver.hpp>
#include <scarbasis/units.hpp>

namespace scarbasis {

struct SelectionParams {
  double e_ref = from_cm1(4100.0);      // window reference energy
  double c_b = 6.0;                     // basis-margin coefficient
  std::function<double(double)> rho;    // density of states model
  double sigma_sc = -1.0;               // dispersion scale; <= 0: pool median
  int n_b_override = 0;                 // > 0 skips the size formula (tests)
};

// Number of states with energy below e in one parity sector: the classically
// accessible momentum-ellipse area integrated over configuration space with
// theta restricted to [0, pi], divided by (2 pi hbar)^2. Returns 0 below the
// potential floor; monotone in e.
double weyl_count(const PesModel& pes, double e);

// Density of states rho(E) = d/dE weyl_count, as the analytic derivative of
// a cubic-spline fit through n_nodes samples on [e_lo, e_hi]. Throws
// NumericError if the fitted count fails to increase anywhere on the range.
std::function<double(double)> density_model(const PesModel& pes, double e_lo,
                                            double e_hi, int n_nodes = 48);

// eta_j = rho(E_j) * sqrt(sigma_j^2 + max(0, E_j - e_ref)^2). The energy
// excess term discounts states whose quantized energy sits above the
// reference window.
double selection_parameter(const LocalizedState& state,
                           const SelectionParams& params);

// Basis size N_b = round(N_sc(e_ref + 2 sigma_sc) + c_b sigma_sc rho(e_ref)).
// Throws ConfigError when the pool holds fewer candidates than that; the fix
// is to supply more (typically longer) periodic orbits.
int basis_size(const PesModel& pes, const SelectionParams& params,
               const std::vector<LocalizedState>& pool);

struct BasisSelection {
  std::vector<LocalizedState> pool;   // phase-aligned candidate states
  std::vector<double> eta;            // per candidate, pool order
  std::vector<int> selected;          // pool indices in selection order
  std::vector<Wavefunction> aux;      // orthonormal span of the selected
  std::vector<double> residual_norm;  // picked component norm per step
  std::string warning;                // non-empty on early stop
};

// Greedy selection. Candidates must share one grid, be normalized, be real
// up to a global phase, and satisfy E_j < e_ref + 2 sigma_j. A candidate
// whose orthogonal component drops below norm 1e-6 is excluded permanently;
// if that exhausts the pool before N_b states are picked the selection
// stops early and says so in `warning`.
BasisSelection select_basis(const std::vector<LocalizedState>& pool,
                            const SelectionParams& params,
                            const PesModel& pes);

struct EigenResult {
  std::vector<double> e;        // ascending, cm^-1
  Eigen::MatrixXd c;            // column N: coefficients in the aux basis
  std::vector<double> sigma;    // per-state dispersion, cm^-1
  std::vector<double> sigma_r;  // sigma * rho(E), dimensionless
  Parity parity = Parity::even;
};

// <phi_a|H|phi_b> over the auxiliary basis, symmetrized and diagonalized.
// Guards: the auxiliary Gram matrix must be the identity within 1e-10, and
// any imaginary part or asymmetry of the Hamiltonian matrix above 1e-6
// signals quadrature trouble; both raise NumericError.
EigenResult assemble_and_diagonalize(const BasisSelection& sel,
                                     const PesModel& pes,
                                     const SelectionParams& params,
                                     Parity parity = Parity::even);

}  // namespace scarbasis
