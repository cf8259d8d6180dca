#include <scarbasis/wf_io.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <scarbasis/errors.hpp>
#include <scarbasis/units.hpp>

static_assert(std::endian::native == std::endian::little,
              "wavefunction files are little-endian");

namespace scarbasis {

namespace {

constexpr char kMagic[4] = {'S', 'C', 'W', 'F'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_f64(std::ostream& os, double v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t get_u32(std::istream& is, const char* what) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v))
    throw IoError(std::string("wavefunction file ends before the ") + what);
  return v;
}

double get_f64(std::istream& is, const char* what) {
  double v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v))
    throw IoError(std::string("wavefunction file ends before the ") + what);
  return v;
}

} // namespace

void write_scwf(const std::string& path, const Wavefunction& wf) {
  const GridSpec& g = wf.grid;
  if (g.size() <= 0 || wf.amp.size() != static_cast<size_t>(g.size()))
    throw ConfigError("wavefunction does not match its grid");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os.write(kMagic, sizeof kMagic);
  put_u32(os, kVersion);
  put_u32(os, static_cast<std::uint32_t>(g.n_r));
  put_u32(os, static_cast<std::uint32_t>(g.n_th));
  put_f64(os, g.r_min);
  put_f64(os, g.r_max);
  put_f64(os, g.th_min);
  put_f64(os, g.th_max);
  os.write(reinterpret_cast<const char*>(wf.amp.data()),
           static_cast<std::streamsize>(wf.amp.size() * sizeof(wf.amp[0])));
  if (!os) throw IoError("short write to '" + path + "'");
}

Wavefunction read_scwf(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "' for reading");
  char magic[4];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("'" + path + "' is not a wavefunction file");
  const std::uint32_t version = get_u32(is, "version");
  if (version != kVersion)
    throw IoError("unsupported wavefunction file version " +
                  std::to_string(version));
  const std::uint32_t n_r = get_u32(is, "grid shape");
  const std::uint32_t n_th = get_u32(is, "grid shape");
  if (n_r == 0 || n_th == 0 || n_r > (1u << 20) || n_th > (1u << 20) ||
      static_cast<std::uint64_t>(n_r) * n_th > (1u << 26))
    throw IoError("implausible grid shape in '" + path + "'");

  GridSpec g;
  g.n_r = static_cast<int>(n_r);
  g.n_th = static_cast<int>(n_th);
  g.r_min = get_f64(is, "grid bounds");
  g.r_max = get_f64(is, "grid bounds");
  g.th_min = get_f64(is, "grid bounds");
  g.th_max = get_f64(is, "grid bounds");
  if (!(g.r_max > g.r_min) || !(g.th_max > g.th_min))
    throw IoError("degenerate grid bounds in '" + path + "'");

  Wavefunction wf(g);
  if (!is.read(reinterpret_cast<char*>(wf.amp.data()),
               static_cast<std::streamsize>(wf.amp.size() * sizeof(wf.amp[0]))))
    throw IoError("wavefunction file '" + path + "' is truncated");
  return wf;
}

nlohmann::json state_metadata(const LocalizedState& st) {
  nlohmann::json j;
  j["label"] = st.label;
  j["kind"] = st.kind == StateKind::tube ? "tube" : "scar";
  j["n"] = st.n;
  j["e_n_cm1"] = to_cm1(st.e_n);
  j["h_mean_cm1"] = st.h_mean_cm1;
  j["sigma_cm1"] = st.sigma_cm1;
  j["raw_norm"] = st.raw_norm;
  j["stable_orbit"] = st.po.stable;
  j["period"] = st.po.period;
  j["flagged"] = st.flagged;
  return j;
}

} // namespace scarbasis
