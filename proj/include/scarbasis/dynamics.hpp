#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "scarbasis/pes.hpp"

namespace scarbasis {

// Phase-space point (R, theta, P_R, P_theta) in atomic units. Along a
// trajectory theta is kept unwrapped so that differences and the action
// integral are well defined; wrap_angle produces the principal value.
struct PhasePoint {
  double R = 0.0;
  double th = 0.0;
  double pR = 0.0;
  double pth = 0.0;
};

// Principal angle in (-pi, pi].
double wrap_angle(double th);

// Total energy in hartree.
double hamiltonian(const PhasePoint& z, const PesModel& pes);

// Right-hand side of Hamilton's equations.
PhasePoint flow_derivative(const PhasePoint& z, const PesModel& pes);

// Jacobian of the flow field with respect to (R, theta, P_R, P_theta).
Eigen::Matrix4d flow_jacobian(const PhasePoint& z, const PesModel& pes);

struct Trajectory {
  std::vector<double> t;
  std::vector<PhasePoint> z;
  std::vector<double> action;  // S(t) = integral of P dq up to t
  double energy = 0.0;         // H at the initial point, hartree
};

// Adaptive integration with dense output. Samples every dt_sample when
// positive, otherwise at each accepted step; the exact endpoint is always
// included. Throws NumericError if the step size collapses, reporting the
// last time reached.
Trajectory integrate(const PhasePoint& start, const PesModel& pes,
                     double t_final, double tol, double dt_sample = 0.0);

struct FlowSample {
  double t = 0.0;
  PhasePoint z;
  double action = 0.0;
  Eigen::Matrix4d M;  // tangent map d z(t) / d z(0)
};

// Flow with tangent (variational) dynamics, sampled at n_samples + 1
// uniformly spaced times covering [0, t_final].
std::vector<FlowSample> variational_flow(const PhasePoint& start,
                                         const PesModel& pes, double t_final,
                                         double tol, int n_samples);

// Scalar event function g(t, z). Crossings are bracketed on dense output and
// refined by bisection to about 1e-13 in time.
using EventFn = std::function<double(double, const PhasePoint&)>;

struct EventCrossing {
  double t = 0.0;
  PhasePoint z;
  double action = 0.0;
};

// Locates the (n_skip + 1)-th crossing of g = 0 matching direction
// (+1 rising, -1 falling, 0 either). A zero held at the start is not
// counted; the event must first move off zero. Returns false when t_cap is
// reached without enough crossings.
bool integrate_to_event(const PhasePoint& start, const PesModel& pes,
                        const EventFn& g, int direction, int n_skip,
                        double t_cap, double tol, EventCrossing& out);

// Minimum energy path lookups extended to all angles through the even
// symmetry of the surface about theta = 0 and pi.
double mep_re(const MinimumEnergyPath& mep, double th);
double mep_dre(const MinimumEnergyPath& mep, double th);

// Section coordinates on rho = R - Re(theta) = 0: psi is the (unwrapped)
// angle and P_psi = P_theta + P_R * dRe/dtheta its conjugate momentum.
struct SosPoint {
  double psi = 0.0;
  double p_psi = 0.0;
  double t = 0.0;
  int direction = +1;
};

struct SosResult {
  std::vector<SosPoint> points;
  bool complete = false;
};

// Full phase point of a section point: R = Re(psi) with P_R chosen so that
// H equals energy and the section is crossed with the given sign of
// d(rho)/dt. Throws NumericError when the point is energetically forbidden.
PhasePoint sos_lift(double psi, double p_psi, double energy,
                    const PesModel& pes, const MinimumEnergyPath& mep,
                    int direction);

// Collects crossings of the section with the requested direction (+1, -1 or
// 0 for both). A start lying on the section with a matching crossing
// direction counts as the first point. complete is false when t_cap ran out
// first; the points gathered so far are still returned.
SosResult poincare_section(const PhasePoint& start, const PesModel& pes,
                           const MinimumEnergyPath& mep, int n_crossings,
                           int direction, double t_cap, double tol = 1e-10);

}  // namespace scarbasis
