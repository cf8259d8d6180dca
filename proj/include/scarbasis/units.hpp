#pragma once

// Atomic units throughout (hbar = 1, masses in m_e, lengths in bohr,
// energies in hartree). Wavenumbers appear only at I/O boundaries.

namespace scarbasis {

inline constexpr double hbar = 1.0;

// CODATA 2018: 1 hartree in cm^-1.
inline constexpr double hartree_per_cm1 = 1.0 / 219474.6313632;
inline constexpr double cm1_per_hartree = 219474.6313632;

// 1 unified atomic mass unit in electron masses.
inline constexpr double amu = 1822.888486209;

inline constexpr double to_cm1(double hartree_val) { return hartree_val * cm1_per_hartree; }
inline constexpr double from_cm1(double cm1_val) { return cm1_val * hartree_per_cm1; }

} // namespace scarbasis
