#pragma once

#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "scarbasis/spline.hpp"

namespace scarbasis {

// Two-DOF model: radial coordinate R (bohr) and bend angle theta (rad),
// with the third coordinate frozen at r = re. The Hamiltonian is
//   H = pR^2 / (2 m_r) + b(R) pth^2 + V(R, theta)
// where b(R) = (1/(mu1 R^2) + 1/(mu2 re^2))/2 for the Jacobi kinetic, or a
// constant for the cartesian kinetic used by the separable harmonic kind.

enum class PesKind { surrogate, expansion, harmonic };
enum class KineticKind { jacobi, cartesian };

struct Masses {
  double mu1 = 0.0; // atom vs diatom reduced mass, a.u.
  double mu2 = 0.0; // diatom reduced mass, a.u.
  double re = 0.0;  // frozen diatom bond length, bohr
};

// Reflect theta into the fundamental domain [0, pi].
double fold_theta(double th);

class PesModel {
public:
  struct Surrogate {
    // D(th) = d[0] + d[1] cos th          (Morse depth)
    // Re(th) = r[0] + r[1] cos th + r[2] cos 2th
    // W(th)  = sum_k w[k-1] (cos k th - cos k pi)   (bend profile, W(pi) = 0)
    // V = D(th) (1 - exp(-a (R - Re(th))))^2 + W(th)
    double d0 = 0.0, d1 = 0.0;
    double a = 0.0;
    double r0 = 0.0, r1 = 0.0, r2 = 0.0;
    std::vector<double> w;
  };

  struct Expansion {
    // V = sum_k c_k(R) T_k(theta), T_k = cos(k theta) or P_k(cos theta);
    // each c_k is a natural cubic spline over the declared radial grid.
    bool legendre = false;
    std::vector<CubicSpline> coeff;
  };

  struct Harmonic {
    double r0 = 0.0, th0 = 0.0;
    double mass_r = 0.0, mass_th = 0.0;
    double om_r = 0.0, om_th = 0.0; // hartree
  };

  static PesModel make_surrogate(Masses m, Surrogate s, double r_lo, double r_hi);
  static PesModel make_expansion(Masses m, Expansion e, double r_lo, double r_hi);
  static PesModel make_harmonic(Harmonic h, double r_lo, double r_hi);

  static PesModel from_json(const nlohmann::json& j);
  static PesModel from_file(const std::string& path);
  nlohmann::json to_json() const;

  double value(double R, double th) const;
  void gradient(double R, double th, double& vR, double& vth) const;
  void hessian(double R, double th, double& vRR, double& vRth, double& vthth) const;

  double mass_r() const;
  double b(double R) const;
  double db(double R) const;
  double d2b(double R) const;

  PesKind kind() const { return kind_; }
  KineticKind kinetic() const { return kinetic_; }
  const Masses& masses() const { return masses_; }

  // True for kinds with exact V(R,th) = V(R,-th) = V(R,2pi-th) symmetry.
  bool theta_symmetric() const { return kind_ != PesKind::harmonic; }

  // Recommended radial domain for grids, scans and section work.
  double r_lo() const { return r_lo_; }
  double r_hi() const { return r_hi_; }

  const Surrogate& surrogate() const;
  const Harmonic& harmonic() const;

private:
  PesModel();  // defined out of line: nested types must be complete

  PesKind kind_ = PesKind::surrogate;
  KineticKind kinetic_ = KineticKind::jacobi;
  Masses masses_;
  double r_lo_ = 0.0, r_hi_ = 0.0;
  std::variant<Surrogate, Expansion, Harmonic> impl_;

  // Raw expansion data retained for serialization round trips.
  std::vector<double> exp_r_grid_;
  std::vector<std::vector<double>> exp_coeff_;

  friend PesModel pes_expansion_from_samples(Masses, bool, std::vector<double>,
                                             std::vector<std::vector<double>>,
                                             double, double);
};

PesModel pes_expansion_from_samples(Masses m, bool legendre,
                                    std::vector<double> r_grid,
                                    std::vector<std::vector<double>> coeff,
                                    double r_lo, double r_hi);

struct StationaryPoint {
  enum class Type { minimum, saddle, maximum };
  double R = 0.0, th = 0.0;
  double energy = 0.0;
  Type type = Type::minimum;
  double hess_eval_lo = 0.0, hess_eval_hi = 0.0;
};

// Damped-Newton search over a scan grid; duplicates merged, points
// classified by the Hessian spectrum. theta folded into [0, pi].
std::vector<StationaryPoint> find_stationary_points(const PesModel& pes);

struct MinimumEnergyPath {
  std::vector<double> theta;  // ascending over [0, pi]
  std::vector<double> re;     // radial minimizer per node
  std::vector<double> v;      // V(re(theta), theta)
  CubicSpline re_spline;      // clamped, zero slope at both ends
  CubicSpline v_spline;
};

// Radial minimization per theta node, warm-started along the path.
MinimumEnergyPath minimum_energy_path(const PesModel& pes, int n_nodes = 257);

} // namespace scarbasis
