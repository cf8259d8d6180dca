#include "scarbasis/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <boost/numeric/odeint.hpp>

#include "scarbasis/errors.hpp"

namespace scarbasis {

namespace {

namespace ode = boost::numeric::odeint;
using state_type = std::vector<double>;

PhasePoint unpack(const state_type& x) { return PhasePoint{x[0], x[1], x[2], x[3]}; }

// Flow plus the action quadrature dS/dt = P dq/dt; 5 states.
struct FlowSystem {
  const PesModel* pes;
  void operator()(const state_type& x, state_type& dx, double) const {
    const PhasePoint z = unpack(x);
    const PhasePoint f = flow_derivative(z, *pes);
    if (!std::isfinite(f.R + f.th + f.pR + f.pth))
      throw NumericError("flow derivative became non-finite");
    dx[0] = f.R;
    dx[1] = f.th;
    dx[2] = f.pR;
    dx[3] = f.pth;
    dx[4] = z.pR * f.R + z.pth * f.th;
  }
};

// Flow, action and tangent map; 21 states with M row-major in x[5..20].
struct VariationalSystem {
  const PesModel* pes;
  void operator()(const state_type& x, state_type& dx, double) const {
    const PhasePoint z = unpack(x);
    const PhasePoint f = flow_derivative(z, *pes);
    if (!std::isfinite(f.R + f.th + f.pR + f.pth))
      throw NumericError("flow derivative became non-finite");
    dx[0] = f.R;
    dx[1] = f.th;
    dx[2] = f.pR;
    dx[3] = f.pth;
    dx[4] = z.pR * f.R + z.pth * f.th;
    const Eigen::Matrix4d A = flow_jacobian(z, *pes);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        double s = 0.0;
        for (int k = 0; k < 4; ++k) s += A(i, k) * x[5 + 4 * k + j];
        dx[5 + 4 * i + j] = s;
      }
  }
};

using dense_stepper =
    ode::result_of::make_dense_output<ode::runge_kutta_dopri5<state_type>>::type;

dense_stepper make_stepper(double tol) {
  if (!(tol > 1e-14 && tol < 1e-4))
    throw ConfigError("integration tolerance must lie in (1e-14, 1e-4)");
  return ode::make_dense_output(tol, tol, ode::runge_kutta_dopri5<state_type>());
}

void check_progress(double t_before, double t_after) {
  if (t_after - t_before < 1e-13 * std::max(1.0, std::fabs(t_before)))
    throw NumericError("integration step collapsed at t = " + std::to_string(t_before));
}

int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

bool direction_ok(int direction, int s_lo, int s_hi) {
  if (direction > 0) return s_lo < 0 && s_hi > 0;
  if (direction < 0) return s_lo > 0 && s_hi < 0;
  return s_lo * s_hi < 0;
}

// Walks the dense output of the flow, handing every directed zero crossing
// of g to cb; cb returns false to stop. Crossings are bracketed on a scan
// grid no coarser than dt_scan so that sub-step oscillations of g are not
// missed, then refined by bisection.
void walk_events(const PhasePoint& start, const PesModel& pes, const EventFn& g,
                 int direction, double t_cap, double tol, double dt_scan,
                 const std::function<bool(const EventCrossing&)>& cb) {
  if (!(t_cap > 0.0)) throw ConfigError("event search: t_cap must be positive");
  FlowSystem sys{&pes};
  auto st = make_stepper(tol);
  state_type x{start.R, start.th, start.pR, start.pth, 0.0};
  st.initialize(x, 0.0, 1.0);

  state_type tmp(5);
  auto g_at = [&](double t) {
    st.calc_state(t, tmp);
    return g(t, unpack(tmp));
  };

  double t_prev = 0.0;
  double g_prev = g(0.0, start);
  int s_prev = sign_of(g_prev);

  while (t_prev < t_cap) {
    const double t_before = st.current_time();
    st.do_step(sys);
    check_progress(t_before, st.current_time());
    const double t_hi = std::min(st.current_time(), t_cap);
    const int nsub = std::max(1, static_cast<int>(std::ceil((t_hi - t_prev) / dt_scan)));
    for (int k = 1; k <= nsub; ++k) {
      const double t_cur = t_prev + (t_hi - t_prev) * k / nsub;
      const double g_cur = g_at(t_cur);
      const int s_cur = sign_of(g_cur);
      if (s_cur == 0) continue;  // resolved by the next scan point
      if (s_prev != 0 && direction_ok(direction, s_prev, s_cur)) {
        double lo = t_prev, hi = t_cur;
        int s_lo = s_prev;
        while (hi - lo > 1e-13 * std::max(1.0, hi)) {
          const double mid = 0.5 * (lo + hi);
          const int s_mid = sign_of(g_at(mid));
          if (s_mid == s_lo && s_mid != 0) {
            lo = mid;
          } else {
            hi = mid;
          }
        }
        EventCrossing ev;
        ev.t = 0.5 * (lo + hi);
        st.calc_state(ev.t, tmp);
        ev.z = unpack(tmp);
        ev.action = tmp[4];
        if (!cb(ev)) return;
      }
      s_prev = s_cur;
      t_prev = t_cur;
    }
    t_prev = t_hi;
  }
}

}  // namespace

double wrap_angle(double th) {
  double w = std::remainder(th, 2.0 * M_PI);
  if (w <= -M_PI) w = M_PI;
  return w;
}

double hamiltonian(const PhasePoint& z, const PesModel& pes) {
  return z.pR * z.pR / (2.0 * pes.mass_r()) + pes.b(z.R) * z.pth * z.pth +
         pes.value(z.R, z.th);
}

PhasePoint flow_derivative(const PhasePoint& z, const PesModel& pes) {
  double vR, vth;
  pes.gradient(z.R, z.th, vR, vth);
  PhasePoint f;
  f.R = z.pR / pes.mass_r();
  f.th = 2.0 * pes.b(z.R) * z.pth;
  f.pR = -vR - pes.db(z.R) * z.pth * z.pth;
  f.pth = -vth;
  return f;
}

Eigen::Matrix4d flow_jacobian(const PhasePoint& z, const PesModel& pes) {
  double vRR, vRth, vthth;
  pes.hessian(z.R, z.th, vRR, vRth, vthth);
  const double b1 = pes.db(z.R);
  const double b2 = pes.d2b(z.R);
  Eigen::Matrix4d A = Eigen::Matrix4d::Zero();
  A(0, 2) = 1.0 / pes.mass_r();
  A(1, 0) = 2.0 * b1 * z.pth;
  A(1, 3) = 2.0 * pes.b(z.R);
  A(2, 0) = -vRR - b2 * z.pth * z.pth;
  A(2, 1) = -vRth;
  A(2, 3) = -2.0 * b1 * z.pth;
  A(3, 0) = -vRth;
  A(3, 1) = -vthth;
  return A;
}

Trajectory integrate(const PhasePoint& start, const PesModel& pes,
                     double t_final, double tol, double dt_sample) {
  if (!(t_final > 0.0)) throw ConfigError("integrate: t_final must be positive");
  FlowSystem sys{&pes};
  auto st = make_stepper(tol);
  state_type x{start.R, start.th, start.pR, start.pth, 0.0};
  st.initialize(x, 0.0, 1.0);

  Trajectory tr;
  tr.energy = hamiltonian(start, pes);
  auto push = [&](double t, const state_type& s) {
    tr.t.push_back(t);
    tr.z.push_back(unpack(s));
    tr.action.push_back(s[4]);
  };
  push(0.0, x);

  state_type tmp(5);
  double next_sample = dt_sample;
  while (st.current_time() < t_final) {
    const double t_before = st.current_time();
    st.do_step(sys);
    check_progress(t_before, st.current_time());
    if (dt_sample > 0.0) {
      while (next_sample <= st.current_time() && next_sample < t_final) {
        st.calc_state(next_sample, tmp);
        push(next_sample, tmp);
        next_sample += dt_sample;
      }
    } else if (st.current_time() < t_final) {
      push(st.current_time(), st.current_state());
    }
  }
  st.calc_state(t_final, tmp);
  push(t_final, tmp);
  return tr;
}

std::vector<FlowSample> variational_flow(const PhasePoint& start,
                                         const PesModel& pes, double t_final,
                                         double tol, int n_samples) {
  if (!(t_final > 0.0)) throw ConfigError("variational_flow: t_final must be positive");
  if (n_samples < 1) throw ConfigError("variational_flow: n_samples must be at least 1");
  VariationalSystem sys{&pes};
  auto st = make_stepper(tol);
  state_type x(21, 0.0);
  x[0] = start.R;
  x[1] = start.th;
  x[2] = start.pR;
  x[3] = start.pth;
  for (int i = 0; i < 4; ++i) x[5 + 4 * i + i] = 1.0;
  st.initialize(x, 0.0, 1.0);

  std::vector<FlowSample> out;
  out.reserve(n_samples + 1);
  state_type tmp(21);
  auto record = [&](double t, const state_type& s) {
    FlowSample fs;
    fs.t = t;
    fs.z = unpack(s);
    fs.action = s[4];
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) fs.M(i, j) = s[5 + 4 * i + j];
    out.push_back(fs);
  };
  record(0.0, x);

  int k = 1;
  while (k <= n_samples) {
    const double t_before = st.current_time();
    st.do_step(sys);
    check_progress(t_before, st.current_time());
    while (k <= n_samples && t_final * k / n_samples <= st.current_time()) {
      st.calc_state(t_final * k / n_samples, tmp);
      record(t_final * k / n_samples, tmp);
      ++k;
    }
  }
  return out;
}

bool integrate_to_event(const PhasePoint& start, const PesModel& pes,
                        const EventFn& g, int direction, int n_skip,
                        double t_cap, double tol, EventCrossing& out) {
  const double dt_scan = std::min(t_cap / 1024.0, 250.0);
  bool found = false;
  int seen = 0;
  walk_events(start, pes, g, direction, t_cap, tol, dt_scan,
              [&](const EventCrossing& ev) {
                if (seen++ < n_skip) return true;
                out = ev;
                found = true;
                return false;
              });
  return found;
}

double mep_re(const MinimumEnergyPath& mep, double th) {
  return mep.re_spline(fold_theta(th));
}

double mep_dre(const MinimumEnergyPath& mep, double th) {
  const double w = wrap_angle(th);
  const double s = w < 0.0 ? -1.0 : 1.0;
  return s * mep.re_spline.deriv(std::fabs(w));
}

PhasePoint sos_lift(double psi, double p_psi, double energy, const PesModel& pes,
                    const MinimumEnergyPath& mep, int direction) {
  if (direction == 0) throw ConfigError("sos_lift: direction must be +1 or -1");
  const double R = mep_re(mep, psi);
  const double d = mep_dre(mep, psi);
  const double b = pes.b(R);
  const double m = pes.mass_r();
  const double K = energy - pes.value(R, psi);
  // P_theta = P_psi - P_R * d; substituting into H = E gives a quadratic
  // in P_R whose discriminant equals (d rho/dt)^2 up to a positive factor.
  const double a2 = 0.5 / m + b * d * d;
  const double a1 = -2.0 * b * d * p_psi;
  const double a0 = b * p_psi * p_psi - K;
  const double disc = a1 * a1 - 4.0 * a2 * a0;
  if (disc < 0.0)
    throw NumericError("section point (" + std::to_string(psi) + ", " +
                       std::to_string(p_psi) + ") is energetically forbidden");
  const double pR = (-a1 + direction * std::sqrt(disc)) / (2.0 * a2);
  PhasePoint z;
  z.R = R;
  z.th = psi;
  z.pR = pR;
  z.pth = p_psi - pR * d;
  return z;
}

SosResult poincare_section(const PhasePoint& start, const PesModel& pes,
                           const MinimumEnergyPath& mep, int n_crossings,
                           int direction, double t_cap, double tol) {
  if (n_crossings < 1) throw ConfigError("poincare_section: n_crossings must be positive");
  SosResult res;
  res.points.reserve(n_crossings);

  auto rho_dot = [&](const PhasePoint& z) {
    const PhasePoint f = flow_derivative(z, pes);
    return f.R - mep_dre(mep, z.th) * f.th;
  };
  auto emit = [&](const PhasePoint& z, double t) {
    SosPoint p;
    p.psi = z.th;
    p.p_psi = z.pth + z.pR * mep_dre(mep, z.th);
    p.t = t;
    p.direction = rho_dot(z) >= 0.0 ? +1 : -1;
    res.points.push_back(p);
  };

  const double rho0 = start.R - mep_re(mep, start.th);
  if (std::fabs(rho0) < 1e-10 * std::max(1.0, std::fabs(start.R))) {
    const int d0 = rho_dot(start) >= 0.0 ? +1 : -1;
    if (direction == 0 || d0 == direction) emit(start, 0.0);
  }
  if (static_cast<int>(res.points.size()) >= n_crossings) {
    res.complete = true;
    return res;
  }

  EventFn g = [&](double, const PhasePoint& z) {
    return z.R - mep_re(mep, z.th);
  };
  const double dt_scan = std::min(t_cap / 1024.0, 250.0);
  walk_events(start, pes, g, direction, t_cap, tol, dt_scan,
              [&](const EventCrossing& ev) {
                emit(ev.z, ev.t);
                return static_cast<int>(res.points.size()) < n_crossings;
              });
  res.complete = static_cast<int>(res.points.size()) >= n_crossings;
  return res;
}

}  // namespace scarbasis
