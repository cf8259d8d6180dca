#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <random>

#include "scarbasis/errors.hpp"
#include "scarbasis/pes.hpp"
#include "scarbasis/units.hpp"
#include "test_fixtures.hpp"

using namespace scarbasis;

namespace {

// Downhill simplex on a 2-D function, used as an independent refinement
// oracle for stationary points.
template <class F>
std::array<double, 2> nelder_mead(F f, std::array<double, 2> x0, double scale, int iters) {
  std::array<std::array<double, 2>, 3> p{
      x0, {x0[0] + scale, x0[1]}, {x0[0], x0[1] + scale}};
  std::array<double, 3> v{f(p[0]), f(p[1]), f(p[2])};
  for (int it = 0; it < iters; ++it) {
    std::array<int, 3> idx{0, 1, 2};
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return v[a] < v[b]; });
    const auto &best = p[idx[0]], &mid = p[idx[1]];
    auto& worst = p[idx[2]];
    std::array<double, 2> cen{0.5 * (best[0] + mid[0]), 0.5 * (best[1] + mid[1])};
    std::array<double, 2> refl{2.0 * cen[0] - worst[0], 2.0 * cen[1] - worst[1]};
    double vr = f(refl);
    if (vr < v[idx[0]]) {
      std::array<double, 2> exp_{3.0 * cen[0] - 2.0 * worst[0], 3.0 * cen[1] - 2.0 * worst[1]};
      const double ve = f(exp_);
      if (ve < vr) {
        worst = exp_;
        v[idx[2]] = ve;
      } else {
        worst = refl;
        v[idx[2]] = vr;
      }
    } else if (vr < v[idx[1]]) {
      worst = refl;
      v[idx[2]] = vr;
    } else {
      std::array<double, 2> con{0.5 * (cen[0] + worst[0]), 0.5 * (cen[1] + worst[1])};
      const double vc = f(con);
      if (vc < v[idx[2]]) {
        worst = con;
        v[idx[2]] = vc;
      } else {
        for (int k : {1, 2}) {
          auto& q = p[idx[k]];
          q = {0.5 * (q[0] + best[0]), 0.5 * (q[1] + best[1])};
          v[idx[k]] = f(q);
        }
      }
    }
  }
  std::array<int, 3> idx{0, 1, 2};
  std::sort(idx.begin(), idx.end(), [&](int a, int b) { return v[a] < v[b]; });
  return p[idx[0]];
}

double grad_sq(const PesModel& pes, double R, double th) {
  double gR, gT;
  pes.gradient(R, th, gR, gT);
  return gR * gR + gT * gT;
}

} // namespace

TEST_CASE("two-well surrogate: deep minimum sits at theta = pi with energy zero") {
  const PesModel pes = fixtures::two_well();
  const auto pts = find_stationary_points(pes);
  REQUIRE(!pts.empty());
  const auto& gm = pts.front();
  CHECK(gm.type == StationaryPoint::Type::minimum);
  CHECK(std::fabs(gm.th - M_PI) < 1e-9);
  CHECK(std::fabs(gm.energy) < 1e-12);
}

TEST_CASE("two-well surrogate: both minima, one interior saddle, barrier ordering") {
  const PesModel pes = fixtures::two_well();
  const auto pts = find_stationary_points(pes);

  int n_min = 0, n_saddle = 0;
  const StationaryPoint* saddle = nullptr;
  const StationaryPoint* second_min = nullptr;
  for (const auto& p : pts) {
    if (p.type == StationaryPoint::Type::minimum) {
      ++n_min;
      if (p.th < 0.5) second_min = &p;
    }
    if (p.type == StationaryPoint::Type::saddle) {
      ++n_saddle;
      saddle = &p;
    }
  }
  REQUIRE(n_min == 2);
  REQUIRE(n_saddle == 1);
  REQUIRE(second_min != nullptr);
  CHECK(std::fabs(second_min->th) < 1e-9);
  CHECK(saddle->th > 0.05);
  CHECK(saddle->th < M_PI - 0.05);
  CHECK(saddle->energy > second_min->energy);
  CHECK(second_min->energy > 0.0);
}

TEST_CASE("saddle location agrees with an independent simplex refinement") {
  const PesModel pes = fixtures::two_well();
  const auto pts = find_stationary_points(pes);
  const StationaryPoint* saddle = nullptr;
  for (const auto& p : pts)
    if (p.type == StationaryPoint::Type::saddle) saddle = &p;
  REQUIRE(saddle != nullptr);

  // Dense scan for the best |grad V|^2 seed with indefinite Hessian.
  double bR = 0.0, bT = 0.0, bg = 1e300;
  for (int i = 0; i <= 160; ++i) {
    for (int k = 1; k < 160; ++k) {
      const double R = pes.r_lo() + (pes.r_hi() - pes.r_lo()) * i / 160.0;
      const double th = M_PI * k / 160.0;
      double hRR, hRT, hTT;
      pes.hessian(R, th, hRR, hRT, hTT);
      if (hRR * hTT - hRT * hRT >= 0.0) continue;
      const double g = grad_sq(pes, R, th);
      if (g < bg) {
        bg = g;
        bR = R;
        bT = th;
      }
    }
  }
  const auto opt = nelder_mead(
      [&](const std::array<double, 2>& x) { return grad_sq(pes, x[0], x[1]); },
      {bR, bT}, 0.02, 400);
  CHECK(std::fabs(opt[0] - saddle->R) < 1e-6);
  CHECK(std::fabs(opt[1] - saddle->th) < 1e-6);
}

TEST_CASE("theta reflection symmetry about 0 and pi") {
  const PesModel pes = fixtures::two_well();
  const double scale = from_cm1(25000.0);
  for (double R : {2.6, 3.8, 4.4, 5.9}) {
    for (double th : {0.13, 0.71, 1.9, 2.77}) {
      CHECK(std::fabs(pes.value(R, th) - pes.value(R, -th)) < 1e-13 * scale);
      CHECK(std::fabs(pes.value(R, th) - pes.value(R, 2.0 * M_PI - th)) < 1e-13 * scale);
    }
  }
}

TEST_CASE("analytic gradient and hessian match central differences") {
  const PesModel pes = fixtures::two_well();
  std::mt19937 rng(7121u);
  std::uniform_real_distribution<double> uR(2.6, 6.4), uT(0.05, M_PI - 0.05);
  const double h = 1e-5;
  for (int trial = 0; trial < 100; ++trial) {
    const double R = uR(rng), th = uT(rng);
    double gR, gT;
    pes.gradient(R, th, gR, gT);
    const double fdR = (pes.value(R + h, th) - pes.value(R - h, th)) / (2.0 * h);
    const double fdT = (pes.value(R, th + h) - pes.value(R, th - h)) / (2.0 * h);
    const double gscale = std::max({std::fabs(gR), std::fabs(gT), 1e-8});
    CHECK(std::fabs(gR - fdR) < 1e-6 * gscale + 1e-12);
    CHECK(std::fabs(gT - fdT) < 1e-6 * gscale + 1e-12);

    double hRR, hRT, hTT;
    pes.hessian(R, th, hRR, hRT, hTT);
    double gRp, gTp, gRm, gTm;
    pes.gradient(R + h, th, gRp, gTp);
    pes.gradient(R - h, th, gRm, gTm);
    const double fdRR = (gRp - gRm) / (2.0 * h);
    const double fdRT = (gTp - gTm) / (2.0 * h);
    pes.gradient(R, th + h, gRp, gTp);
    pes.gradient(R, th - h, gRm, gTm);
    const double fdTT = (gTp - gTm) / (2.0 * h);
    const double hscale = std::max({std::fabs(hRR), std::fabs(hTT), 1e-6});
    CHECK(std::fabs(hRR - fdRR) < 1e-5 * hscale);
    CHECK(std::fabs(hRT - fdRT) < 1e-5 * hscale);
    CHECK(std::fabs(hTT - fdTT) < 1e-5 * hscale);
  }
}

TEST_CASE("stationary classification agrees with a dense grid scan") {
  const PesModel pes = fixtures::two_well();
  // 8-neighbor minima scan with reflection padding across theta = 0, pi.
  const int nR = 240, nT = 120;
  auto V = [&](int i, int k) {
    int kk = k;
    if (kk < 0) kk = -kk;
    if (kk > nT) kk = 2 * nT - kk;
    const double R = pes.r_lo() + (pes.r_hi() - pes.r_lo()) * i / nR;
    const double th = M_PI * kk / nT;
    return pes.value(R, th);
  };
  int scan_minima = 0;
  for (int i = 1; i < nR; ++i) {
    for (int k = 0; k <= nT; ++k) {
      const double v0 = V(i, k);
      bool lowest = true;
      for (int di = -1; di <= 1 && lowest; ++di)
        for (int dk = -1; dk <= 1; ++dk) {
          if (di == 0 && dk == 0) continue;
          if (V(i + di, k + dk) <= v0) {
            lowest = false;
            break;
          }
        }
      if (lowest) ++scan_minima;
    }
  }
  int found_minima = 0;
  for (const auto& p : find_stationary_points(pes))
    if (p.type == StationaryPoint::Type::minimum) ++found_minima;
  CHECK(found_minima == scan_minima);
}

TEST_CASE("single-well harmonic kind: one minimum, no saddle") {
  const PesModel pes = fixtures::harmonic();
  const auto pts = find_stationary_points(pes);
  REQUIRE(pts.size() == 1);
  CHECK(pts.front().type == StationaryPoint::Type::minimum);
  CHECK(pts.front().R == doctest::Approx(4.0).epsilon(1e-10));
  CHECK(pts.front().th == doctest::Approx(0.5 * M_PI).epsilon(1e-10));
}

TEST_CASE("minimum energy path: stationarity, endpoints, barrier") {
  const PesModel pes = fixtures::two_well();
  const auto mep = minimum_energy_path(pes, 257);
  const auto pts = find_stationary_points(pes);

  // Radial stationarity along the path.
  for (std::size_t i = 0; i < mep.theta.size(); i += 5) {
    double gR, gT;
    pes.gradient(mep.re[i], mep.theta[i], gR, gT);
    CHECK(std::fabs(gR) < 1e-10);
  }

  // Endpoints coincide with the two minima.
  const StationaryPoint* min0 = nullptr;
  const StationaryPoint* minpi = nullptr;
  const StationaryPoint* saddle = nullptr;
  for (const auto& p : pts) {
    if (p.type == StationaryPoint::Type::minimum && p.th < 0.5) min0 = &p;
    if (p.type == StationaryPoint::Type::minimum && p.th > 2.5) minpi = &p;
    if (p.type == StationaryPoint::Type::saddle) saddle = &p;
  }
  REQUIRE(min0 != nullptr);
  REQUIRE(minpi != nullptr);
  REQUIRE(saddle != nullptr);
  CHECK(std::fabs(mep.re.front() - min0->R) < 1e-8);
  CHECK(std::fabs(mep.re.back() - minpi->R) < 1e-8);

  // The interior maximum of the path profile is the saddle energy.
  double vmax = -1e300, th_at = 0.0;
  for (std::size_t i = 1; i + 1 < mep.theta.size(); ++i)
    if (mep.v[i] > vmax) {
      vmax = mep.v[i];
      th_at = mep.theta[i];
    }
  // Golden refinement on the spline.
  double a = th_at - 0.05, b = th_at + 0.05;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = -mep.v_spline(x1), f2 = -mep.v_spline(x2);
  for (int it = 0; it < 90; ++it) {
    if (f1 < f2) {
      b = x2; x2 = x1; f2 = f1;
      x1 = b - gr * (b - a); f1 = -mep.v_spline(x1);
    } else {
      a = x1; x1 = x2; f1 = f2;
      x2 = a + gr * (b - a); f2 = -mep.v_spline(x2);
    }
  }
  const double peak = mep.v_spline(0.5 * (a + b));
  CHECK(std::fabs(peak - saddle->energy) < 1e-8 * std::max(1.0, std::fabs(saddle->energy)) + 1e-12);
}

TEST_CASE("json round trip preserves the surrogate") {
  const PesModel pes = fixtures::two_well();
  const PesModel back = PesModel::from_json(pes.to_json());
  std::mt19937 rng(99u);
  std::uniform_real_distribution<double> uR(2.4, 7.0), uT(0.0, M_PI);
  for (int i = 0; i < 40; ++i) {
    const double R = uR(rng), th = uT(rng);
    CHECK(pes.value(R, th) == doctest::Approx(back.value(R, th)).epsilon(1e-14));
  }
  CHECK(back.masses().mu1 == doctest::Approx(10072.0));
  CHECK(back.kinetic() == KineticKind::jacobi);
}

TEST_CASE("expansion kind: evaluation, derivatives, domain guard") {
  // Tabulate the surrogate into a cosine expansion and compare.
  const PesModel pes = fixtures::two_well();
  const int K = 12, nR = 81;
  std::vector<double> r_grid(nR);
  for (int i = 0; i < nR; ++i) r_grid[i] = 2.4 + (6.8 - 2.4) * i / (nR - 1.0);

  // Project onto cos(k th) with the midpoint rule (exact enough for the
  // surrogate's short cosine content).
  const int nq = 512;
  std::vector<std::vector<double>> coeff(K + 1, std::vector<double>(nR, 0.0));
  for (int i = 0; i < nR; ++i) {
    for (int q = 0; q < nq; ++q) {
      const double th = M_PI * (q + 0.5) / nq;
      const double v = pes.value(r_grid[i], th);
      for (int k = 0; k <= K; ++k)
        coeff[k][i] += v * std::cos(k * th) * (k == 0 ? 1.0 : 2.0) / nq;
    }
  }
  const PesModel tab = pes_expansion_from_samples(pes.masses(), false, r_grid, coeff, 2.4, 6.8);

  const double scale = from_cm1(25000.0);
  for (double R : {2.8, 3.9, 4.6, 6.1}) {
    for (double th : {0.2, 1.1, 2.3, 3.0}) {
      CHECK(std::fabs(tab.value(R, th) - pes.value(R, th)) < 2e-5 * scale);
      double g1R, g1T, g2R, g2T;
      tab.gradient(R, th, g1R, g1T);
      pes.gradient(R, th, g2R, g2T);
      CHECK(std::fabs(g1T - g2T) < 2e-4 * scale);
    }
  }
  CHECK_THROWS_AS(tab.value(1.9, 1.0), NumericError);
}

TEST_CASE("legendre expansion basis evaluates consistently") {
  // A hand-built Legendre model: V = c0(R) + c2(R) P2(cos th).
  std::vector<double> r_grid{3.0, 3.5, 4.0, 4.5, 5.0, 5.5, 6.0};
  std::vector<double> c0(r_grid.size()), c1(r_grid.size(), 0.0), c2(r_grid.size());
  for (std::size_t i = 0; i < r_grid.size(); ++i) {
    const double x = r_grid[i] - 4.3;
    c0[i] = 0.02 * x * x;
    c2[i] = 0.004 + 0.001 * x;
  }
  const PesModel leg = pes_expansion_from_samples(Masses{10072.0, 11780.9, 2.186}, true,
                                                  r_grid, {c0, c1, c2}, 3.0, 6.0);
  for (double th : {0.0, 0.4, 1.3, 2.2, M_PI}) {
    const double c = std::cos(th);
    const double expect = 0.02 * 0.2 * 0.2 + (0.004 + 0.001 * 0.2) * 0.5 * (3.0 * c * c - 1.0);
    CHECK(leg.value(4.5, th) == doctest::Approx(expect).epsilon(1e-9));
  }
  // d/dth at the symmetry axes vanishes.
  double gR, gT;
  leg.gradient(4.5, 0.0, gR, gT);
  CHECK(std::fabs(gT) < 1e-14);
  leg.gradient(4.5, M_PI, gR, gT);
  CHECK(std::fabs(gT) < 1e-14);
}
