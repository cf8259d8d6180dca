#include "scarbasis/pes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "scarbasis/errors.hpp"
#include "scarbasis/units.hpp"

namespace scarbasis {

double fold_theta(double th) {
  th = std::fabs(std::fmod(th, 2.0 * M_PI));
  if (th > M_PI) th = 2.0 * M_PI - th;
  return th;
}

namespace {

struct Deriv2 {
  double v = 0.0, dR = 0.0, dth = 0.0;
  double dRR = 0.0, dRth = 0.0, dthth = 0.0;
};

Deriv2 eval_surrogate(const PesModel::Surrogate& s, double R, double th) {
  const double c = std::cos(th), sn = std::sin(th);
  const double c2 = std::cos(2.0 * th), s2 = std::sin(2.0 * th);

  const double D = s.d0 + s.d1 * c;
  const double Dp = -s.d1 * sn;
  const double Dpp = -s.d1 * c;

  const double Re = s.r0 + s.r1 * c + s.r2 * c2;
  const double Rep = -s.r1 * sn - 2.0 * s.r2 * s2;
  const double Repp = -s.r1 * c - 4.0 * s.r2 * c2;

  double W = 0.0, Wp = 0.0, Wpp = 0.0;
  for (std::size_t k = 1; k <= s.w.size(); ++k) {
    const double kk = static_cast<double>(k);
    const double wk = s.w[k - 1];
    W += wk * (std::cos(kk * th) - std::cos(kk * M_PI));
    Wp += -wk * kk * std::sin(kk * th);
    Wpp += -wk * kk * kk * std::cos(kk * th);
  }

  const double ex = std::exp(-s.a * (R - Re));
  const double f = 1.0 - ex;
  const double fR = s.a * ex;
  const double fth = -s.a * ex * Rep;
  const double fRR = -s.a * fR;
  const double fRth = -s.a * fth;
  const double fthth = -s.a * ex * (s.a * Rep * Rep + Repp);

  Deriv2 d;
  d.v = D * f * f + W;
  d.dR = 2.0 * D * f * fR;
  d.dth = Dp * f * f + 2.0 * D * f * fth + Wp;
  d.dRR = 2.0 * D * (fR * fR + f * fRR);
  d.dRth = 2.0 * Dp * f * fR + 2.0 * D * (fth * fR + f * fRth);
  d.dthth = Dpp * f * f + 4.0 * Dp * f * fth + 2.0 * D * (fth * fth + f * fthth) + Wpp;
  return d;
}

// P_k(c) and P'_k(c) for k = 0..kmax.
void legendre_all(double c, std::size_t kmax, std::vector<double>& p, std::vector<double>& dp) {
  p.resize(kmax + 1);
  dp.resize(kmax + 1);
  p[0] = 1.0;
  dp[0] = 0.0;
  if (kmax == 0) return;
  p[1] = c;
  dp[1] = 1.0;
  for (std::size_t k = 1; k + 1 <= kmax; ++k) {
    const double kk = static_cast<double>(k);
    p[k + 1] = ((2.0 * kk + 1.0) * c * p[k] - kk * p[k - 1]) / (kk + 1.0);
    dp[k + 1] = dp[k - 1] + (2.0 * kk + 1.0) * p[k];
  }
}

Deriv2 eval_expansion(const PesModel::Expansion& e, double R, double th) {
  const double lo = e.coeff.front().x_min(), hi = e.coeff.front().x_max();
  if (R < lo - 1e-9 || R > hi + 1e-9)
    throw NumericError("R = " + std::to_string(R) + " outside tabulated range [" +
                       std::to_string(lo) + ", " + std::to_string(hi) + "]");
  const std::size_t n = e.coeff.size();
  Deriv2 d;
  if (e.legendre) {
    const double c = std::cos(th), sn = std::sin(th);
    static thread_local std::vector<double> p, dp;
    legendre_all(c, n - 1, p, dp);
    for (std::size_t k = 0; k < n; ++k) {
      const double kk = static_cast<double>(k);
      const double ck = e.coeff[k](R);
      const double g = p[k];
      const double gth = -sn * dp[k];
      // sin^2 P'' eliminated via the Legendre equation.
      const double gthth = c * dp[k] - kk * (kk + 1.0) * p[k];
      d.v += ck * g;
      d.dR += e.coeff[k].deriv(R) * g;
      d.dth += ck * gth;
      d.dRR += e.coeff[k].deriv2(R) * g;
      d.dRth += e.coeff[k].deriv(R) * gth;
      d.dthth += ck * gthth;
    }
  } else {
    for (std::size_t k = 0; k < n; ++k) {
      const double kk = static_cast<double>(k);
      const double ck = e.coeff[k](R);
      const double g = std::cos(kk * th);
      const double gth = -kk * std::sin(kk * th);
      const double gthth = -kk * kk * g;
      d.v += ck * g;
      d.dR += e.coeff[k].deriv(R) * g;
      d.dth += ck * gth;
      d.dRR += e.coeff[k].deriv2(R) * g;
      d.dRth += e.coeff[k].deriv(R) * gth;
      d.dthth += ck * gthth;
    }
  }
  return d;
}

Deriv2 eval_harmonic(const PesModel::Harmonic& h, double R, double th) {
  const double kr = h.mass_r * h.om_r * h.om_r;
  const double kt = h.mass_th * h.om_th * h.om_th;
  Deriv2 d;
  d.v = 0.5 * kr * (R - h.r0) * (R - h.r0) + 0.5 * kt * (th - h.th0) * (th - h.th0);
  d.dR = kr * (R - h.r0);
  d.dth = kt * (th - h.th0);
  d.dRR = kr;
  d.dRth = 0.0;
  d.dthth = kt;
  return d;
}

Deriv2 eval_any(const std::variant<PesModel::Surrogate, PesModel::Expansion, PesModel::Harmonic>& impl,
                double R, double th) {
  if (const auto* s = std::get_if<PesModel::Surrogate>(&impl)) return eval_surrogate(*s, R, th);
  if (const auto* e = std::get_if<PesModel::Expansion>(&impl)) return eval_expansion(*e, R, th);
  return eval_harmonic(std::get<PesModel::Harmonic>(impl), R, th);
}

} // namespace

// --- construction -----------------------------------------------------------

// Explicit init: the variant's default constructor is unavailable because the
// alternatives are nested types, incomplete where the member is declared.
PesModel::PesModel() : impl_(Surrogate{}) {}

PesModel PesModel::make_surrogate(Masses m, Surrogate s, double r_lo, double r_hi) {
  if (m.mu1 <= 0.0 || m.mu2 <= 0.0 || m.re <= 0.0)
    throw ConfigError("surrogate: masses and re must be positive");
  if (s.a <= 0.0) throw ConfigError("surrogate: morse width must be positive");
  if (s.d0 - std::fabs(s.d1) <= 0.0)
    throw ConfigError("surrogate: morse depth must stay positive for all theta");
  if (s.w.empty()) throw ConfigError("surrogate: bend profile is empty");
  if (!(r_lo > 0.0 && r_hi > r_lo)) throw ConfigError("surrogate: bad radial domain");

  // The bend profile vanishes at pi by construction; demand that this is
  // its global minimum so the deep well sits at theta = pi with V = 0.
  for (int i = 0; i <= 720; ++i) {
    const double th = M_PI * i / 720.0;
    double W = 0.0;
    for (std::size_t k = 1; k <= s.w.size(); ++k)
      W += s.w[k - 1] * (std::cos(k * th) - std::cos(k * M_PI));
    if (W < -1e-12) throw ConfigError("surrogate: bend profile dips below the pi well");
  }

  PesModel p;
  p.kind_ = PesKind::surrogate;
  p.kinetic_ = KineticKind::jacobi;
  p.masses_ = m;
  p.r_lo_ = r_lo;
  p.r_hi_ = r_hi;
  p.impl_ = std::move(s);
  return p;
}

PesModel PesModel::make_expansion(Masses m, Expansion e, double r_lo, double r_hi) {
  if (m.mu1 <= 0.0 || m.mu2 <= 0.0 || m.re <= 0.0)
    throw ConfigError("expansion: masses and re must be positive");
  if (e.coeff.empty()) throw ConfigError("expansion: no coefficient splines");
  PesModel p;
  p.kind_ = PesKind::expansion;
  p.kinetic_ = KineticKind::jacobi;
  p.masses_ = m;
  p.r_lo_ = r_lo;
  p.r_hi_ = r_hi;
  p.impl_ = std::move(e);
  return p;
}

PesModel PesModel::make_harmonic(Harmonic h, double r_lo, double r_hi) {
  if (h.mass_r <= 0.0 || h.mass_th <= 0.0 || h.om_r <= 0.0 || h.om_th <= 0.0)
    throw ConfigError("harmonic: masses and frequencies must be positive");
  PesModel p;
  p.kind_ = PesKind::harmonic;
  p.kinetic_ = KineticKind::cartesian;
  p.masses_ = Masses{h.mass_r, h.mass_th, 1.0};
  p.r_lo_ = r_lo;
  p.r_hi_ = r_hi;
  p.impl_ = std::move(h);
  return p;
}

PesModel pes_expansion_from_samples(Masses m, bool legendre,
                                    std::vector<double> r_grid,
                                    std::vector<std::vector<double>> coeff,
                                    double r_lo, double r_hi) {
  PesModel::Expansion e;
  e.legendre = legendre;
  for (const auto& row : coeff) {
    if (row.size() != r_grid.size())
      throw ConfigError("expansion: coefficient row length != radial grid length");
    e.coeff.emplace_back(r_grid, row);
  }
  PesModel p = PesModel::make_expansion(m, std::move(e), r_lo, r_hi);
  p.exp_r_grid_ = std::move(r_grid);
  p.exp_coeff_ = std::move(coeff);
  return p;
}

const PesModel::Surrogate& PesModel::surrogate() const {
  const auto* s = std::get_if<Surrogate>(&impl_);
  if (!s) throw ConfigError("model is not a surrogate");
  return *s;
}

const PesModel::Harmonic& PesModel::harmonic() const {
  const auto* h = std::get_if<Harmonic>(&impl_);
  if (!h) throw ConfigError("model is not harmonic");
  return *h;
}

// --- evaluation --------------------------------------------------------------

double PesModel::value(double R, double th) const {
  return eval_any(impl_, R, th).v;
}

void PesModel::gradient(double R, double th, double& vR, double& vth) const {
  const Deriv2 d = eval_any(impl_, R, th);
  vR = d.dR;
  vth = d.dth;
}

void PesModel::hessian(double R, double th, double& vRR, double& vRth, double& vthth) const {
  const Deriv2 d = eval_any(impl_, R, th);
  vRR = d.dRR;
  vRth = d.dRth;
  vthth = d.dthth;
}

double PesModel::mass_r() const {
  return kinetic_ == KineticKind::jacobi ? masses_.mu1 : std::get<Harmonic>(impl_).mass_r;
}

double PesModel::b(double R) const {
  if (kinetic_ == KineticKind::cartesian) return 0.5 / std::get<Harmonic>(impl_).mass_th;
  if (R < 1e-6) throw NumericError("R = " + std::to_string(R) + " too small for the Jacobi kinetic");
  return 0.5 * (1.0 / (masses_.mu1 * R * R) + 1.0 / (masses_.mu2 * masses_.re * masses_.re));
}

double PesModel::db(double R) const {
  if (kinetic_ == KineticKind::cartesian) return 0.0;
  return -1.0 / (masses_.mu1 * R * R * R);
}

double PesModel::d2b(double R) const {
  if (kinetic_ == KineticKind::cartesian) return 0.0;
  return 3.0 / (masses_.mu1 * R * R * R * R);
}

// --- JSON --------------------------------------------------------------------

namespace {

Masses masses_from_json(const nlohmann::json& j) {
  Masses m;
  m.mu1 = j.at("mu1_au").get<double>();
  m.mu2 = j.at("mu2_au").get<double>();
  m.re = j.at("re_au").get<double>();
  return m;
}

} // namespace

PesModel PesModel::from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  try {
    if (kind == "surrogate") {
      const auto& js = j.at("surrogate");
      Surrogate s;
      const auto depth = js.at("morse_depth_cm1").get<std::vector<double>>();
      if (depth.size() != 2) throw ConfigError("morse_depth_cm1 must have 2 entries");
      s.d0 = from_cm1(depth[0]);
      s.d1 = from_cm1(depth[1]);
      s.a = js.at("morse_width_inv_au").get<double>();
      const auto req = js.at("r_eq_au").get<std::vector<double>>();
      if (req.size() != 3) throw ConfigError("r_eq_au must have 3 entries");
      s.r0 = req[0];
      s.r1 = req[1];
      s.r2 = req[2];
      for (double w : js.at("bend_profile_cm1").get<std::vector<double>>())
        s.w.push_back(from_cm1(w));
      const Masses m = masses_from_json(j.at("masses"));
      double lo = s.r0 - 1.0, hi = s.r0 + 2.8;
      if (j.contains("domain")) {
        lo = j["domain"].value("r_min_au", lo);
        hi = j["domain"].value("r_max_au", hi);
      }
      return make_surrogate(m, std::move(s), lo, hi);
    }
    if (kind == "expansion") {
      const auto& je = j.at("expansion");
      const std::string basis = je.value("theta_basis", "cosine");
      if (basis != "cosine" && basis != "legendre")
        throw ConfigError("theta_basis must be cosine or legendre");
      auto r_grid = je.at("r_grid_au").get<std::vector<double>>();
      std::vector<std::vector<double>> coeff;
      for (const auto& row : je.at("coeff_cm1")) {
        coeff.emplace_back();
        for (double v : row.get<std::vector<double>>()) coeff.back().push_back(from_cm1(v));
      }
      double lo = r_grid.front(), hi = r_grid.back();
      if (j.contains("domain")) {
        lo = j["domain"].value("r_min_au", lo);
        hi = j["domain"].value("r_max_au", hi);
      }
      return pes_expansion_from_samples(masses_from_json(j.at("masses")), basis == "legendre",
                                        std::move(r_grid), std::move(coeff), lo, hi);
    }
    if (kind == "harmonic") {
      const auto& jh = j.at("harmonic");
      Harmonic h;
      h.r0 = jh.at("r0_au").get<double>();
      h.th0 = jh.at("theta0_rad").get<double>();
      h.mass_r = jh.at("mass_r_au").get<double>();
      h.mass_th = jh.at("mass_theta_au").get<double>();
      h.om_r = from_cm1(jh.at("omega_r_cm1").get<double>());
      h.om_th = from_cm1(jh.at("omega_theta_cm1").get<double>());
      double lo = h.r0 - 1.6, hi = h.r0 + 1.6;
      if (j.contains("domain")) {
        lo = j["domain"].value("r_min_au", lo);
        hi = j["domain"].value("r_max_au", hi);
      }
      return make_harmonic(h, lo, hi);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad model json: ") + e.what());
  }
  throw ConfigError("unknown model kind: " + kind);
}

PesModel PesModel::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("cannot parse model file: ") + e.what());
  }
  return from_json(j);
}

nlohmann::json PesModel::to_json() const {
  nlohmann::json j;
  j["domain"] = {{"r_min_au", r_lo_}, {"r_max_au", r_hi_}};
  if (const auto* s = std::get_if<Surrogate>(&impl_)) {
    j["kind"] = "surrogate";
    j["masses"] = {{"mu1_au", masses_.mu1}, {"mu2_au", masses_.mu2}, {"re_au", masses_.re}};
    std::vector<double> w_cm1;
    for (double w : s->w) w_cm1.push_back(to_cm1(w));
    j["surrogate"] = {{"morse_depth_cm1", {to_cm1(s->d0), to_cm1(s->d1)}},
                      {"morse_width_inv_au", s->a},
                      {"r_eq_au", {s->r0, s->r1, s->r2}},
                      {"bend_profile_cm1", w_cm1}};
  } else if (std::get_if<Expansion>(&impl_)) {
    const auto& e = std::get<Expansion>(impl_);
    j["kind"] = "expansion";
    j["masses"] = {{"mu1_au", masses_.mu1}, {"mu2_au", masses_.mu2}, {"re_au", masses_.re}};
    std::vector<std::vector<double>> coeff_cm1;
    for (const auto& row : exp_coeff_) {
      coeff_cm1.emplace_back();
      for (double v : row) coeff_cm1.back().push_back(to_cm1(v));
    }
    j["expansion"] = {{"theta_basis", e.legendre ? "legendre" : "cosine"},
                      {"r_grid_au", exp_r_grid_},
                      {"coeff_cm1", coeff_cm1}};
  } else {
    const auto& h = std::get<Harmonic>(impl_);
    j["kind"] = "harmonic";
    j["harmonic"] = {{"r0_au", h.r0},
                     {"theta0_rad", h.th0},
                     {"mass_r_au", h.mass_r},
                     {"mass_theta_au", h.mass_th},
                     {"omega_r_cm1", to_cm1(h.om_r)},
                     {"omega_theta_cm1", to_cm1(h.om_th)}};
  }
  return j;
}

// --- stationary points -------------------------------------------------------

namespace {

void hess_evals(double a, double b, double c, double& lo, double& hi) {
  // eigenvalues of [[a, b], [b, c]]
  const double tr = a + c;
  const double disc = std::sqrt(std::max(0.0, (a - c) * (a - c) + 4.0 * b * b));
  lo = 0.5 * (tr - disc);
  hi = 0.5 * (tr + disc);
}

} // namespace

std::vector<StationaryPoint> find_stationary_points(const PesModel& pes) {
  std::vector<StationaryPoint> out;
  const int nR = 28, nT = 25;
  const double gtol = 1e-12;

  for (int i = 0; i < nR; ++i) {
    for (int k = 0; k < nT; ++k) {
      double R = pes.r_lo() + (pes.r_hi() - pes.r_lo()) * (i + 0.5) / nR;
      double th = M_PI * k / (nT - 1.0);
      bool ok = false;
      for (int it = 0; it < 80; ++it) {
        double gR, gT, hRR, hRT, hTT;
        pes.gradient(R, th, gR, gT);
        pes.hessian(R, th, hRR, hRT, hTT);
        if (std::fabs(gR) < gtol && std::fabs(gT) < gtol) {
          ok = true;
          break;
        }
        // Regularize toward a descent-to-critical Newton step.
        double lo, hi;
        hess_evals(hRR, hRT, hTT, lo, hi);
        const double tau = std::fabs(lo) < 1e-9 ? 1e-9 : 0.0;
        const double a = hRR + tau, d = hTT + tau;
        const double det = a * d - hRT * hRT;
        if (std::fabs(det) < 1e-30) break;
        double sR = -(d * gR - hRT * gT) / det;
        double sT = -(-hRT * gR + a * gT) / det;
        const double cap = 0.25;
        const double sc = std::max(std::fabs(sR), std::fabs(sT));
        if (sc > cap) {
          sR *= cap / sc;
          sT *= cap / sc;
        }
        R += sR;
        th += sT;
        if (R < pes.r_lo() - 0.5 || R > pes.r_hi() + 0.5 || std::fabs(th) > 1.5 * M_PI) break;
      }
      if (!ok) continue;

      StationaryPoint p;
      p.R = R;
      p.th = pes.theta_symmetric() ? fold_theta(th) : th;
      p.energy = pes.value(p.R, p.th);
      double hRR, hRT, hTT;
      pes.hessian(p.R, p.th, hRR, hRT, hTT);
      hess_evals(hRR, hRT, hTT, p.hess_eval_lo, p.hess_eval_hi);
      if (p.hess_eval_lo > 0.0)
        p.type = StationaryPoint::Type::minimum;
      else if (p.hess_eval_hi < 0.0)
        p.type = StationaryPoint::Type::maximum;
      else
        p.type = StationaryPoint::Type::saddle;

      bool dup = false;
      for (const auto& q : out)
        if (std::fabs(q.R - p.R) < 1e-6 && std::fabs(q.th - p.th) < 1e-6) dup = true;
      if (!dup) out.push_back(p);
    }
  }
  std::sort(out.begin(), out.end(),
            [](const StationaryPoint& a, const StationaryPoint& b) { return a.energy < b.energy; });
  return out;
}

// --- minimum energy path -----------------------------------------------------

namespace {

// Radial minimizer at fixed theta: guarded Newton from a warm start,
// golden-section fallback on the scan bracket.
double radial_minimum(const PesModel& pes, double th, double guess) {
  double R = guess;
  for (int it = 0; it < 60; ++it) {
    double gR, gT, hRR, hRT, hTT;
    pes.gradient(R, th, gR, gT);
    if (std::fabs(gR) < 1e-14) return R;
    pes.hessian(R, th, hRR, hRT, hTT);
    if (hRR <= 0.0) break;
    double step = -gR / hRR;
    step = std::clamp(step, -0.3, 0.3);
    R += step;
    if (R < pes.r_lo() || R > pes.r_hi()) break;
    if (std::fabs(step) < 1e-15) return R;
  }

  // Fallback: bracket the minimum by scanning, then golden-section.
  const int n = 200;
  double best = pes.r_lo(), bestv = pes.value(best, th);
  for (int i = 1; i <= n; ++i) {
    const double Ri = pes.r_lo() + (pes.r_hi() - pes.r_lo()) * i / n;
    const double v = pes.value(Ri, th);
    if (v < bestv) {
      bestv = v;
      best = Ri;
    }
  }
  const double h = (pes.r_hi() - pes.r_lo()) / n;
  double a = std::max(pes.r_lo(), best - h), b = std::min(pes.r_hi(), best + h);
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = pes.value(x1, th), f2 = pes.value(x2, th);
  for (int it = 0; it < 120 && (b - a) > 1e-13; ++it) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = pes.value(x1, th);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = pes.value(x2, th);
    }
  }
  return 0.5 * (a + b);
}

} // namespace

MinimumEnergyPath minimum_energy_path(const PesModel& pes, int n_nodes) {
  if (n_nodes < 9) throw ConfigError("minimum_energy_path: too few nodes");
  MinimumEnergyPath mep;
  mep.theta.resize(n_nodes);
  mep.re.resize(n_nodes);
  mep.v.resize(n_nodes);

  double warm = 0.5 * (pes.r_lo() + pes.r_hi());
  {
    // Initialize the warm start from a coarse scan at theta = 0.
    double bestv = pes.value(warm, 0.0);
    for (int i = 0; i <= 100; ++i) {
      const double R = pes.r_lo() + (pes.r_hi() - pes.r_lo()) * i / 100.0;
      const double v = pes.value(R, 0.0);
      if (v < bestv) {
        bestv = v;
        warm = R;
      }
    }
  }
  for (int i = 0; i < n_nodes; ++i) {
    const double th = M_PI * i / (n_nodes - 1.0);
    warm = radial_minimum(pes, th, warm);
    mep.theta[i] = th;
    mep.re[i] = warm;
    mep.v[i] = pes.value(warm, th);
  }
  mep.re_spline = CubicSpline(mep.theta, mep.re, 0.0, 0.0);
  mep.v_spline = CubicSpline(mep.theta, mep.v, 0.0, 0.0);
  return mep;
}

} // namespace scarbasis
