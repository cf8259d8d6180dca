#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <fstream>
#include <random>
#include <vector>

#include "scarbasis/errors.hpp"
#include "scarbasis/pes.hpp"
#include "scarbasis/porbit.hpp"
#include "scarbasis/qgrid.hpp"
#include "scarbasis/units.hpp"
#include "scarbasis/wf_io.hpp"
#include "test_fixtures.hpp"

using namespace scarbasis;
using Cplx = std::complex<double>;

namespace {

double quad_weight(const GridSpec& g) { return g.dr() * g.dth(); }

// Position moments straight off the quadrature rule.
double mean_r(const Wavefunction& wf) {
  double num = 0.0, den = 0.0;
  for (int j = 0; j < wf.grid.n_th; ++j)
    for (int i = 0; i < wf.grid.n_r; ++i) {
      double p = std::norm(wf.at(i, j));
      num += p * wf.grid.r(i);
      den += p;
    }
  return num / den;
}

double mean_th(const Wavefunction& wf) {
  double num = 0.0, den = 0.0;
  for (int j = 0; j < wf.grid.n_th; ++j)
    for (int i = 0; i < wf.grid.n_r; ++i) {
      double p = std::norm(wf.at(i, j));
      num += p * wf.grid.th(j);
      den += p;
    }
  return num / den;
}

// Radial momentum through a plain DFT, independent of the library's FFT
// plumbing. Parseval fixes the 1/N weight.
double mean_pr(const Wavefunction& wf) {
  const GridSpec& g = wf.grid;
  const double length = g.r_max - g.r_min;
  double num = 0.0, den = 0.0;
  for (int j = 0; j < g.n_th; ++j) {
    for (int f = 0; f < g.n_r; ++f) {
      Cplx c(0.0, 0.0);
      for (int i = 0; i < g.n_r; ++i) {
        double ph = -2.0 * M_PI * double(f) * double(i) / g.n_r;
        c += wf.at(i, j) * std::exp(Cplx(0.0, ph));
      }
      int fs = f < g.n_r / 2 ? f : f - g.n_r;
      double k = 2.0 * M_PI * fs / length;
      num += g.hbar * k * std::norm(c) / g.n_r;
      den += std::norm(c) / g.n_r;
    }
  }
  return num / den;
}

double max_amp_diff(const Wavefunction& a, const Wavefunction& b) {
  double m = 0.0;
  for (size_t k = 0; k < a.amp.size(); ++k)
    m = std::max(m, std::abs(a.amp[k] - b.amp[k]));
  return m;
}

double l2_diff(const Wavefunction& a, const Wavefunction& b) {
  double s = 0.0;
  for (size_t k = 0; k < a.amp.size(); ++k) s += std::norm(a.amp[k] - b.amp[k]);
  return std::sqrt(s * quad_weight(a.grid));
}

Wavefunction random_state(const GridSpec& g, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Wavefunction wf(g);
  for (Cplx& a : wf.amp) a = Cplx(u(rng), u(rng));
  return wf;
}

// Separable ground state of the quadratic surface: the frozen Gaussian at
// the minimum with the width matched mode by mode.
Wavefunction matched_ground(const PesModel& pes, const GridSpec& g) {
  const auto& h = pes.harmonic();
  PhasePoint z{h.r0, h.th0, 0.0, 0.0};
  Wavefunction wf = frozen_gaussian(g, z, 0.5 * h.mass_r * h.om_r / g.hbar,
                                    0.5 * h.mass_th * h.om_th / g.hbar, 0.0);
  wf.normalize();
  return wf;
}

StationaryPoint find_saddle(const PesModel& pes) {
  for (const auto& sp : find_stationary_points(pes))
    if (sp.type == StationaryPoint::Type::saddle) return sp;
  throw std::runtime_error("fixture lost its saddle");
}

}  // namespace

TEST_CASE("frozen gaussians carry the requested centre, momentum, and phase") {
  const PesModel pes = fixtures::harmonic();
  const GridSpec g = GridSpec::create(64, 64, 2.4, 5.6, pes, from_cm1(3000.0));

  // Unit-weight packet away from every boundary: closed-form norm.
  const double ar = 16.114, at = 14.123;
  Wavefunction fg =
      frozen_gaussian(g, PhasePoint{4.0, M_PI / 2.0, 0.0, 0.0}, ar, at, 0.0);
  const double n2 = fg.norm() * fg.norm();
  CHECK(n2 == doctest::Approx(M_PI / (2.0 * std::sqrt(ar * at))).epsilon(1e-6));

  PhasePoint z{4.05, 1.2, 3.7, -2.1};
  Wavefunction fgm = frozen_gaussian(g, z, ar, at, 0.83);
  CHECK(mean_r(fgm) == doctest::Approx(4.05).epsilon(1e-9));
  CHECK(mean_th(fgm) == doctest::Approx(1.2).epsilon(1e-9));
  CHECK(mean_pr(fgm) == doctest::Approx(3.7).epsilon(1e-7));

  // The overall phase rides on gamma and is 2 pi periodic.
  Wavefunction fg0 = frozen_gaussian(g, z, ar, at, 0.0);
  Cplx ov = overlap(fg0, fgm);
  CHECK(std::arg(ov) == doctest::Approx(0.83).epsilon(1e-10));
  Wavefunction fgp = frozen_gaussian(g, z, ar, at, 0.83 + 2.0 * M_PI);
  CHECK(max_amp_diff(fgm, fgp) < 1e-13);

  // A centre below theta = 0 reflects into the even sector with its angular
  // momentum reversed.
  Wavefunction neg =
      frozen_gaussian(g, PhasePoint{4.05, -1.2, 3.7, 2.1}, ar, at, 0.0);
  Wavefunction ref =
      frozen_gaussian(g, PhasePoint{4.05, 1.2, 3.7, -2.1}, ar, at, 0.0);
  CHECK(max_amp_diff(neg, ref) < 1e-15);

  // Centres whose 3-sigma ball leaves the radial box are rejected.
  CHECK_THROWS_AS(
      frozen_gaussian(g, PhasePoint{2.5, M_PI / 2.0, 0.0, 0.0}, ar, at, 0.0),
      ConfigError);
}

TEST_CASE("hamiltonian application is spectrally exact on a separable eigenstate") {
  const PesModel pes = fixtures::harmonic();
  const auto& h = pes.harmonic();
  const GridSpec g = GridSpec::create(64, 64, 2.4, 5.6, pes, from_cm1(3000.0));

  Wavefunction psi = matched_ground(pes, g);
  Wavefunction hpsi = apply_hamiltonian(psi, pes);
  const double e0 = 0.5 * (h.om_r + h.om_th);

  Wavefunction res(g);
  for (size_t k = 0; k < psi.amp.size(); ++k)
    res.amp[k] = hpsi.amp[k] - e0 * psi.amp[k];
  CHECK(res.norm() < 1e-6);

  // Hermiticity and linearity on dense random states.
  Wavefunction a = random_state(g, 7), b = random_state(g, 8);
  Cplx ab = overlap(a, apply_hamiltonian(b, pes));
  Cplx ba = overlap(b, apply_hamiltonian(a, pes));
  CHECK(std::abs(ab - std::conj(ba)) < 1e-10 * (1.0 + std::abs(ab)));

  Wavefunction lin(g);
  const Cplx ca(0.3, 0.0), cb(0.0, -1.7);
  for (size_t k = 0; k < lin.amp.size(); ++k)
    lin.amp[k] = ca * a.amp[k] + cb * b.amp[k];
  Wavefunction hl = apply_hamiltonian(lin, pes);
  Wavefunction ha = apply_hamiltonian(a, pes);
  Wavefunction hb = apply_hamiltonian(b, pes);
  double md = 0.0;
  for (size_t k = 0; k < hl.amp.size(); ++k)
    md = std::max(md, std::abs(hl.amp[k] - ca * ha.amp[k] - cb * hb.amp[k]));
  CHECK(md < 1e-10);
}

TEST_CASE("grid factory enforces resolution at the reference energy") {
  const PesModel pes = fixtures::harmonic();

  CHECK_THROWS_AS(GridSpec::create(24, 64, 2.4, 5.6, pes, from_cm1(3000.0)),
                  ConfigError);
  CHECK_THROWS_AS(GridSpec::create(48, 64, 2.4, 5.6, pes, from_cm1(3000.0)),
                  ConfigError);
  CHECK_THROWS_AS(GridSpec::create(64, 64, 2.4, 5.6, pes, from_cm1(40000.0)),
                  ConfigError);
  CHECK_THROWS_AS(GridSpec::create(64, 64, 2.4, 5.6, pes, -from_cm1(10.0)),
                  ConfigError);

  const GridSpec g = GridSpec::create(64, 64, 2.4, 5.6, pes, from_cm1(3000.0));
  CHECK(g.dr() == doctest::Approx(0.05));
  CHECK(g.r(0) == doctest::Approx(2.4));
  CHECK(g.r(63) == doctest::Approx(5.6 - 0.05));
  CHECK(g.th(0) == doctest::Approx(0.5 * g.dth()));
  CHECK(g.th(63) == doctest::Approx(M_PI - 0.5 * g.dth()));
}

TEST_CASE("split-operator propagation holds an eigenstate and its phase") {
  const PesModel pes = fixtures::harmonic();
  const auto& h = pes.harmonic();
  const GridSpec g = GridSpec::create(64, 64, 2.4, 5.6, pes, from_cm1(3000.0));

  Wavefunction psi = matched_ground(pes, g);
  const double dt = 1.0;
  const int n = 1024;
  REQUIRE(dt < suggest_time_step(g, pes));
  Wavefunction out = propagate(psi, pes, dt, n);

  const double e0 = 0.5 * (h.om_r + h.om_th);
  Cplx ov = overlap(psi, out);
  CHECK(std::abs(ov) > 1.0 - 1e-8);
  Cplx expected = std::exp(Cplx(0.0, -e0 * dt * n / g.hbar));
  CHECK(std::abs(ov / std::abs(ov) - expected) < 0.02);

  CHECK_THROWS_AS(propagate(psi, pes, dt, -3), ConfigError);

  Wavefunction bad = psi;
  bad.amp[0] = Cplx(std::numeric_limits<double>::infinity(), 0.0);
  CHECK_THROWS_AS(propagate(bad, pes, dt, 1), NumericError);
}

TEST_CASE("split-operator propagation conserves the norm over long runs") {
  const PesModel pes = fixtures::harmonic();
  const GridSpec g = GridSpec::create(32, 32, 2.4, 5.6, pes, from_cm1(1200.0));

  Wavefunction psi = matched_ground(pes, g);
  const double dt = suggest_time_step(g, pes);
  Wavefunction out = propagate(psi, pes, dt, 10000);
  CHECK(std::fabs(out.norm() - 1.0) < 1e-9);
}

TEST_CASE("split-operator error falls off at second order in the step") {
  // Quadratic surface: the two kinetic factors commute, so the splitting
  // defect is purely the Strang dt^2 term and Richardson halving gives 4x.
  const PesModel pes = fixtures::harmonic();
  const GridSpec g = GridSpec::create(64, 64, 2.4, 5.6, pes, from_cm1(3000.0));
  const auto& h = pes.harmonic();

  Wavefunction psi =
      frozen_gaussian(g, PhasePoint{4.15, M_PI / 2.0 + 0.12, 0.0, 0.0},
                      0.5 * h.mass_r * h.om_r, 0.5 * h.mass_th * h.om_th, 0.0);
  psi.normalize();

  const double t_total = 512.0;
  Wavefunction ref = propagate(psi, pes, t_total / 2048.0, 2048);
  Wavefunction c1 = propagate(psi, pes, t_total / 256.0, 256);
  Wavefunction c2 = propagate(psi, pes, t_total / 512.0, 512);

  const double e1 = l2_diff(c1, ref);
  const double e2 = l2_diff(c2, ref);
  REQUIRE(e1 > 1e-10);
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.2));
}

TEST_CASE("time step suggestion caps the kinetic phase per step") {
  const PesModel pes = fixtures::harmonic();
  const GridSpec g = GridSpec::create(64, 64, 2.4, 5.6, pes, from_cm1(3000.0));

  const double dt = suggest_time_step(g, pes, 0.5);
  double kmax = M_PI / g.dr();
  double tr = g.hbar * g.hbar * kmax * kmax / (2.0 * pes.mass_r());
  double mmax = g.hbar * (g.n_th - 1) * M_PI / (g.th_max - g.th_min);
  double bmax = 0.0;
  for (int i = 0; i < g.n_r; ++i) bmax = std::max(bmax, pes.b(g.r(i)));
  double tth = bmax * mmax * mmax;
  CHECK(dt * std::max(tr, tth) / g.hbar == doctest::Approx(0.5).epsilon(1e-12));

  CHECK(suggest_time_step(g, pes, 0.25) == doctest::Approx(0.5 * dt));
  const GridSpec g2 =
      GridSpec::create(128, 128, 2.4, 5.6, pes, from_cm1(3000.0));
  CHECK(suggest_time_step(g2, pes) < dt);
}

TEST_CASE("energy moments separate mean and dispersion on a known superposition") {
  const PesModel pes = fixtures::harmonic();
  const auto& h = pes.harmonic();
  const GridSpec g = GridSpec::create(64, 64, 2.4, 5.6, pes, from_cm1(3000.0));
  const double e0 = 0.5 * (h.om_r + h.om_th);

  Wavefunction g00 = matched_ground(pes, g);
  EnergyMoments m0 = energy_moments(g00, pes);
  CHECK(m0.mean == doctest::Approx(e0).epsilon(1e-9));
  CHECK(m0.sigma < 1e-4 * e0);

  // First radial excitation: odd prefactor on the same envelope.
  Wavefunction g10(g);
  const double ar = 0.5 * h.mass_r * h.om_r, at = 0.5 * h.mass_th * h.om_th;
  for (int j = 0; j < g.n_th; ++j)
    for (int i = 0; i < g.n_r; ++i) {
      double x = g.r(i) - h.r0, y = g.th(j) - h.th0;
      g10.amp[size_t(j) * g.n_r + i] =
          x * std::exp(-ar * x * x - at * y * y);
    }
  g10.normalize();

  Wavefunction sup(g);
  for (size_t k = 0; k < sup.amp.size(); ++k)
    sup.amp[k] = (g00.amp[k] + g10.amp[k]) / std::sqrt(2.0);
  EnergyMoments ms = energy_moments(sup, pes);
  CHECK(ms.mean == doctest::Approx(e0 + 0.5 * h.om_r).epsilon(1e-8));
  CHECK(ms.sigma == doctest::Approx(0.5 * h.om_r).epsilon(1e-6));

  // A global phase changes nothing.
  Wavefunction rot = sup;
  for (Cplx& a : rot.amp) a *= std::exp(Cplx(0.0, 0.7));
  EnergyMoments mr = energy_moments(rot, pes);
  CHECK(mr.mean == doctest::Approx(ms.mean).epsilon(1e-12));
  CHECK(mr.sigma == doctest::Approx(ms.sigma).epsilon(1e-10));

  Wavefunction off = sup;
  for (Cplx& a : off.amp) a *= 1.2;
  CHECK_THROWS_AS(energy_moments(off, pes), ConfigError);
}

TEST_CASE("overlap is a proper inner product on matching grids") {
  const PesModel pes = fixtures::harmonic();
  const GridSpec g = GridSpec::create(64, 64, 2.4, 5.6, pes, from_cm1(3000.0));

  Wavefunction psi = matched_ground(pes, g);
  CHECK(std::abs(overlap(psi, psi) - Cplx(1.0, 0.0)) < 1e-12);

  Wavefunction a = random_state(g, 21), b = random_state(g, 22);
  CHECK(std::abs(overlap(a, b) - std::conj(overlap(b, a))) < 1e-12);

  GridSpec g2 = g;
  g2.n_th = 128;
  Wavefunction other(g2);
  CHECK_THROWS_AS(overlap(psi, other), ConfigError);
}

TEST_CASE("tube average on the oscillator ground orbit reproduces the eigenstate") {
  const PesModel pes = fixtures::harmonic();
  const auto& h = pes.harmonic();
  const GridSpec g = GridSpec::create(64, 64, 2.4, 5.6, pes, from_cm1(3000.0));

  PoSeed seed;
  seed.kind = PoClass::stretch;
  seed.theta_line = h.th0;
  const double e_orb = 0.5 * h.om_r;  // lowest closure of the radial family
  PeriodicOrbit po = solve_po(pes, nullptr, seed, e_orb);

  TubeOptions opt;
  opt.alpha_r = 0.5 * h.mass_r * h.om_r / g.hbar;
  opt.alpha_th = 0.5 * h.mass_th * h.om_th / g.hbar;
  LocalizedState st = tube_function(po, 0, e_orb, pes, g, opt);

  CHECK(st.kind == StateKind::tube);
  CHECK(st.n == 0);
  CHECK(st.raw_norm > 0.1);
  CHECK(std::fabs(st.wf.norm() - 1.0) < 1e-12);

  Wavefunction exact = matched_ground(pes, g);
  CHECK(std::abs(overlap(st.wf, exact)) > 0.999);
  CHECK(st.h_mean_cm1 ==
        doctest::Approx(to_cm1(0.5 * (h.om_r + h.om_th))).epsilon(1e-3));
  CHECK(st.sigma_cm1 < 10.0);
}

TEST_CASE("tube averages self-cancel between quantized energies") {
  const PesModel pes = fixtures::two_well();
  const MinimumEnergyPath mep = minimum_energy_path(pes);

  PoSeed seed;
  seed.kind = PoClass::bend_symmetric;
  seed.theta_line = M_PI;
  seed.R0 = mep_re(mep, M_PI);
  auto po_at = [&](double e) { return solve_po(pes, nullptr, seed, e); };

  const auto levels = bs_quantize(po_at, from_cm1(1250.0), from_cm1(1600.0), 1);
  REQUIRE(levels.size() == 2);
  CHECK(levels[0].energy == doctest::Approx(from_cm1(1352.8)).epsilon(1e-3));
  CHECK(levels[1].energy == doctest::Approx(from_cm1(1500.0)).epsilon(1e-3));

  const GridSpec g =
      GridSpec::create(64, 64, 2.2, 7.4, pes, from_cm1(1550.0));

  PeriodicOrbit po8 = po_at(levels[0].energy);
  LocalizedState res =
      tube_function(po8, levels[0].n, levels[0].energy, pes, g);
  CHECK(res.raw_norm > 0.05);

  // Odd full-phase closure: the reflection pairs each sample with a
  // partner exactly pi out of phase, so the even-sector average must die.
  PeriodicOrbit po9 = po_at(levels[1].energy);
  TubeOptions loose;
  loose.tol = 1e-4;  // only the vanishing norm matters here
  LocalizedState mid =
      tube_function(po9, levels[1].n, levels[1].energy, pes, g, loose);
  CHECK(mid.raw_norm < 0.1 * res.raw_norm);
}

TEST_CASE("tube energies are stable under grid refinement") {
  const PesModel pes = fixtures::two_well();
  const MinimumEnergyPath mep = minimum_energy_path(pes);

  PoSeed seed;
  seed.kind = PoClass::bend_symmetric;
  seed.theta_line = M_PI;
  seed.R0 = mep_re(mep, M_PI);
  const double e = from_cm1(1644.5);
  PeriodicOrbit po = solve_po(pes, nullptr, seed, e);

  const GridSpec ga = GridSpec::create(64, 64, 2.2, 7.4, pes, from_cm1(1700.0));
  const GridSpec gb =
      GridSpec::create(128, 128, 2.2, 7.4, pes, from_cm1(1700.0));
  LocalizedState sa = tube_function(po, 10, e, pes, ga);
  LocalizedState sb = tube_function(po, 10, e, pes, gb);

  CHECK(std::fabs(sa.h_mean_cm1 - sb.h_mean_cm1) < 0.1);
  CHECK(sa.sigma_cm1 == doctest::Approx(sb.sigma_cm1).epsilon(1e-2));
}

TEST_CASE("windowed filtering sharpens an unstable-orbit tube into a scar") {
  const PesModel pes = fixtures::two_well();
  const MinimumEnergyPath mep = minimum_energy_path(pes);
  const StationaryPoint saddle = find_saddle(pes);

  PoSeed seed;
  seed.kind = PoClass::rotation;
  seed.k_event = 1;
  seed.direction = +1;
  seed.psi0 = saddle.th;
  seed.p_psi0 = 0.0;
  auto po_at = [&](double e) { return solve_po(pes, &mep, seed, e); };

  // First closed phase above the barrier.
  const auto levels = bs_quantize(po_at, from_cm1(3470.0), from_cm1(4300.0), 1);
  REQUIRE(!levels.empty());
  const double e_n = levels[0].energy;
  PeriodicOrbit po = po_at(e_n);
  REQUIRE_FALSE(po.stable);

  const GridSpec g = GridSpec::create(128, 128, 2.2, 7.4, pes,
                                      e_n + from_cm1(500.0));
  LocalizedState tube = tube_function(po, levels[0].n, e_n, pes, g);
  CHECK(tube.raw_norm > 0.02);

  const double lambda = stability_exponent(po);
  const double area = line_action(pes, M_PI, e_n);
  ScarParams sp = ScarParams::from(lambda, area, g.hbar);
  CHECK(sp.t_ehrenfest > 0.0);

  LocalizedState scar = scar_function(tube, sp, pes);
  CHECK(scar.kind == StateKind::scar);
  CHECK(scar.n == tube.n);
  CHECK(std::fabs(scar.wf.norm() - 1.0) < 1e-12);
  CHECK(scar.sigma_cm1 < tube.sigma_cm1);
  CHECK(std::fabs(scar.h_mean_cm1 - to_cm1(e_n)) < 250.0);
  CHECK(std::abs(overlap(scar.wf, tube.wf)) > 0.3);

  // Shrinking the window recovers the tube.
  ScarParams tiny = sp;
  tiny.t_ehrenfest = 2.0;
  LocalizedState near_tube = scar_function(tube, tiny, pes);
  CHECK(std::abs(overlap(near_tube.wf, tube.wf)) > 1.0 - 1e-4);

  // Stable orbits carry no Ehrenfest window.
  PoSeed bseed;
  bseed.kind = PoClass::bend_symmetric;
  bseed.theta_line = M_PI;
  bseed.R0 = mep_re(mep, M_PI);
  PeriodicOrbit bpo = solve_po(pes, nullptr, bseed, from_cm1(1500.0));
  LocalizedState btube = tube_function(bpo, 9, from_cm1(1500.0), pes, g);
  CHECK_THROWS_AS(scar_function(btube, sp, pes), ConfigError);

  CHECK(ScarParams::from(0.5, std::exp(4.0)).t_ehrenfest ==
        doctest::Approx(4.0).epsilon(1e-12));
  CHECK_THROWS_AS(ScarParams::from(0.5, 0.5), ConfigError);
  CHECK_THROWS_AS(ScarParams::from(-1.0, 10.0), ConfigError);
  CHECK_THROWS_AS(ScarParams::from(0.5, 10.0, -1.0), ConfigError);
}

TEST_CASE("wavefunction files round-trip exactly and reject corruption") {
  const PesModel pes = fixtures::two_well();
  const GridSpec g = GridSpec::create(64, 64, 2.2, 7.4, pes, from_cm1(1500.0));
  Wavefunction wf = random_state(g, 11);

  const std::string path = "qgrid_io_roundtrip.scwf";
  write_scwf(path, wf);
  Wavefunction rt = read_scwf(path);
  CHECK(rt.grid.n_r == g.n_r);
  CHECK(rt.grid.n_th == g.n_th);
  CHECK(rt.grid.r_min == g.r_min);
  CHECK(rt.grid.r_max == g.r_max);
  CHECK(max_amp_diff(rt, wf) == 0.0);

  auto slurp = [&]() {
    std::ifstream in(path, std::ios::binary);
    return std::vector<char>((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  };
  auto dump = [](const std::string& p, const std::vector<char>& bytes) {
    std::ofstream out(p, std::ios::binary);
    out.write(bytes.data(), std::streamsize(bytes.size()));
  };

  std::vector<char> raw = slurp();
  REQUIRE(raw.size() > 100);

  std::vector<char> bad = raw;
  bad[0] = 'X';
  dump("qgrid_io_badmagic.scwf", bad);
  CHECK_THROWS_AS(read_scwf("qgrid_io_badmagic.scwf"), IoError);

  bad = raw;
  bad[4] = 2;  // unsupported version
  dump("qgrid_io_badversion.scwf", bad);
  CHECK_THROWS_AS(read_scwf("qgrid_io_badversion.scwf"), IoError);

  bad.assign(raw.begin(), raw.begin() + 60);
  dump("qgrid_io_short.scwf", bad);
  CHECK_THROWS_AS(read_scwf("qgrid_io_short.scwf"), IoError);

  CHECK_THROWS_AS(read_scwf("qgrid_io_missing.scwf"), IoError);

  LocalizedState st;
  st.kind = StateKind::tube;
  st.label = "demo";
  st.n = 3;
  st.e_n = from_cm1(1500.0);
  st.h_mean_cm1 = 1501.0;
  st.sigma_cm1 = 12.5;
  st.raw_norm = 0.25;
  auto j = state_metadata(st);
  CHECK(j["label"] == "demo");
  CHECK(j["kind"] == "tube");
  CHECK(j["n"] == 3);
  CHECK(j["e_n_cm1"].get<double>() == doctest::Approx(1500.0).epsilon(1e-9));
  CHECK(j["sigma_cm1"].get<double>() == doctest::Approx(12.5));
}
