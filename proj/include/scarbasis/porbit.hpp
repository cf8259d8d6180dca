#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "scarbasis/dynamics.hpp"
#include "scarbasis/pes.hpp"

namespace scarbasis {

// Orbit families are located by different shooting schemes:
//  stretch         R oscillation on an invariant line theta in {0, pi}
//  bend_symmetric  libration crossing a symmetry line, found by a 1D shoot
//                  from the reversibility plane {theta = line, P_R = 0}
//  libration       generic self-retracing orbit, 2D shoot from a rest point
//  rotation        fixed point of the section return map; solutions that
//                  turn out to brake are reclassified as librations
enum class PoClass { stretch, bend_symmetric, libration, rotation };

struct PoOptions {
  double tol = 1e-12;        // flow tolerance
  double shoot_tol = 1e-10;  // residual tolerance on the closing momentum
  int max_iter = 40;
  double t_cap = 2.0e6;      // event search horizon, a.u. of time
  int n_finish_samples = 1024;
};

struct PeriodicOrbit {
  PoClass kind = PoClass::stretch;
  std::string label;
  PhasePoint z0;
  double period = 0.0;
  double energy = 0.0;  // hartree
  double action = 0.0;  // loop integral of P dq
  Eigen::Matrix4d monodromy = Eigen::Matrix4d::Identity();
  double tr_transverse = 0.0;  // trace of the reduced 2x2 block
  bool stable = true;
  double lambda_u = 0.0;  // instability exponent, 1/a.u., unstable only
  double nu_s = 0.0;      // stability angle, rad, stable only
  int winding = 0;        // integer half-turn count per period
  int n_brakes = 0;
  int n_conjugate = 0;    // transverse focusing count, diagnostic
};

// Instability exponent; rejects stable orbits.
double stability_exponent(const PeriodicOrbit& po);
// Stability angle; rejects unstable orbits.
double stability_angle(const PeriodicOrbit& po);

// Warm-startable anchor data for one orbit family. Successful solves update
// the guess fields in place.
struct PoSeed {
  PoClass kind = PoClass::stretch;
  double theta_line = M_PI;  // stretch / bend_symmetric anchor
  int k_event = 1;           // which event closes the half period or return
  int direction = +1;        // section crossing direction (rotation)
  double R0 = 0.0;
  double th0 = 0.0;    // libration only
  double psi0 = 0.0;   // rotation only
  double p_psi0 = 0.0; // rotation only
};

// Converges the orbit of the seed's family at the given energy. mep is
// required for the rotation class and ignored otherwise.
PeriodicOrbit solve_po(const PesModel& pes, const MinimumEnergyPath* mep,
                       PoSeed& seed, double energy, const PoOptions& opt = {});

struct WindingInfo {
  int mu = 0;        // brake-count route
  int mu_angle = 0;  // velocity-angle route; must agree with mu
  int n_brakes = 0;
  int n_conjugate = 0;
  std::vector<double> t;
  std::vector<double> mu_t;  // continuous half-turn count, longitudinal
};

// Half-turn bookkeeping from uniformly spaced samples of one full period.
WindingInfo winding_from_samples(const std::vector<FlowSample>& samples,
                                 const PesModel& pes);

struct PoSampling {
  std::vector<FlowSample> samples;  // n_samples + 1 points over [0, T]
  WindingInfo winding;
};

// Re-integrates the orbit with tangent dynamics and angle tracking,
// doubling the sampling if the tracked angles jump too fast.
PoSampling sample_orbit(const PeriodicOrbit& po, const PesModel& pes,
                        int n_samples = 2048, double tol = 1e-12);

struct PoFamily {
  std::string label;
  PoSeed seed;  // state after the last successful solve
  std::vector<PeriodicOrbit> members;
  // Energies between which |tr_transverse| crossed 2 (stability change).
  std::vector<double> bifurcation_marks;
  bool truncated = false;  // a solve failed before the ladder was exhausted
  std::string truncation_reason;
};

// Walks the energy ladder with warm starts. A failed solve truncates the
// family instead of throwing; at least one member must converge.
PoFamily continue_family(const PesModel& pes, const MinimumEnergyPath* mep,
                         PoSeed seed, const std::vector<double>& energies,
                         const PoOptions& opt = {});

struct BsLevel {
  int n = 0;
  double energy = 0.0;
  double period = 0.0;
  double action = 0.0;
  int mu = 0;
};

// Solves S(E)/hbar - mu pi/2 = 2 pi m over [e_lo, e_hi] for the family
// reachable through po_at. stride 2 keeps even m only and labels n = m/2
// (symmetric cross-line librations); stride 1 labels n = m.
std::vector<BsLevel> bs_quantize(const std::function<PeriodicOrbit(double)>& po_at,
                                 double e_lo, double e_hi, int stride);

// Loop integral of P_R over the R oscillation on the theta = line slice at
// the given energy; the area entering the scar filtering window.
double line_action(const PesModel& pes, double theta_line, double energy,
                   const PoOptions& opt = {});

}  // namespace scarbasis
