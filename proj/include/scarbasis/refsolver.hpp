#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "scarbasis/pes.hpp"
#include "scarbasis/qgrid.hpp"

namespace scarbasis {

// Angular boundary sector on [th_min, th_max]: even states have vanishing
// normal derivative on both symmetry lines (cosine representation), odd
// states vanish there (sine representation).
enum class Parity { even, odd };

enum class RefMethod {
  automatic,  // dense below a few thousand grid points, iterative above
  dense,
  lanczos,
};

struct RefOptions {
  double shift_tol_cm1 = 0.1;  // certification: max level shift per doubling
  int max_doublings = 2;
  double residual_tol = 1e-9;  // Ritz pair residual, hartree
  unsigned seed = 20200615;    // iterative start vector, fixed for reruns
  RefMethod method = RefMethod::automatic;
};

// Converged grid eigenpairs, the ground truth the localized basis is
// measured against.
struct ReferenceSpectrum {
  GridSpec grid;  // the grid the returned states live on
  Parity parity = Parity::even;
  std::vector<double> e;             // hartree, ascending
  std::vector<Wavefunction> states;  // orthonormal under the grid quadrature
  std::vector<std::pair<int, int>> grids_tried;
  std::vector<double> shifts_cm1;  // one entry per doubling performed
};

// Diagonalizes the grid Hamiltonian and certifies the lowest n_states by
// doubling both grid dimensions until the levels move less than the
// tolerance. Returns the coarsest certified solution so the states stay on
// the caller's grid whenever that grid is adequate.
ReferenceSpectrum reference_eigensolve(const PesModel& pes,
                                       const GridSpec& grid, int n_states,
                                       Parity parity = Parity::even,
                                       const RefOptions& opt = {});

// Expansion of each reference state over some orthonormal basis whose
// elements carry a characteristic energy (a quantized energy for localized
// states, a diagonal Hamiltonian element for generic ones).
struct BasisExpansion {
  std::vector<double> element_energy;      // hartree, one per basis element
  std::vector<std::vector<double>> coeff;  // coeff[state][element]
};

struct StateComparison {
  double sigma_r = 0.0;  // stick dispersion in mean-level-spacing units
  double r_n = 0.0;      // participation ratio of the expansion
};

// Per-state spread of the expansion: how far across the basis, in energy
// and in element count, each reference state reaches. rho is the density
// of states (per hartree) used to express dispersions in spacing units.
std::vector<StateComparison> comparison_metrics(
    const ReferenceSpectrum& ref, const BasisExpansion& expansion,
    const std::function<double(double)>& rho);

}  // namespace scarbasis
