#pragma once

// Binary wavefunction files: magic "SCWF", version, grid shape and bounds,
// then the complex amplitudes in grid memory order (R fastest). Numbers are
// little-endian; loading on other layouts is rejected at compile time.

#include <string>

#include <json.hpp>

#include <scarbasis/qgrid.hpp>

namespace scarbasis {

void write_scwf(const std::string& path, const Wavefunction& wf);

// Reads a file written by write_scwf. The grid carries the stored shape and
// bounds; hbar defaults to 1 and the mass metadata is left empty.
Wavefunction read_scwf(const std::string& path);

// Sidecar description of a localized state (everything but the amplitudes).
nlohmann::json state_metadata(const LocalizedState& st);

} // namespace scarbasis
