#include "scarbasis/porbit.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "scarbasis/errors.hpp"
#include "scarbasis/units.hpp"

namespace scarbasis {

namespace {

// Symplectic form on (R, theta, P_R, P_theta).
double omega2(const Eigen::Vector4d& u, const Eigen::Vector4d& v) {
  return u(0) * v(2) - u(2) * v(0) + u(1) * v(3) - u(3) * v(1);
}

Eigen::Vector4d flow_vec(const PhasePoint& z, const PesModel& pes) {
  const PhasePoint f = flow_derivative(z, pes);
  return {f.R, f.th, f.pR, f.pth};
}

Eigen::Vector4d grad_h(const PhasePoint& z, const PesModel& pes) {
  double vR, vth;
  pes.gradient(z.R, z.th, vR, vth);
  return {vR + pes.db(z.R) * z.pth * z.pth, vth, z.pR / pes.mass_r(),
          2.0 * pes.b(z.R) * z.pth};
}

Eigen::Matrix4d symplectic_j() {
  Eigen::Matrix4d J = Eigen::Matrix4d::Zero();
  J(0, 2) = J(1, 3) = 1.0;
  J(2, 0) = J(3, 1) = -1.0;
  return J;
}

// Reduces the monodromy to the 2x2 block on the symplectic complement of
// the flow and energy-gradient directions.
Eigen::Matrix2d transverse_block(const Eigen::Matrix4d& M, const PhasePoint& z0,
                                 const PesModel& pes) {
  const Eigen::Vector4d xd = flow_vec(z0, pes);
  const Eigen::Vector4d gh = grad_h(z0, pes);
  const double c = omega2(xd, gh);  // equals |grad H|^2, positive off fixed points
  if (!(c > 0.0)) throw NumericError("transverse frame undefined at a fixed point");

  auto project = [&](Eigen::Vector4d v) {
    const double alpha = omega2(v, gh) / c;
    const double beta = -omega2(v, xd) / c;
    return Eigen::Vector4d(v - alpha * xd - beta * gh);
  };

  Eigen::Vector4d w1 = Eigen::Vector4d::Zero();
  int used = -1;
  for (int i = 0; i < 4; ++i) {
    Eigen::Vector4d cand = project(Eigen::Vector4d::Unit(i));
    if (cand.norm() > w1.norm()) {
      w1 = cand;
      used = i;
    }
  }
  w1.normalize();

  Eigen::Vector4d w2 = Eigen::Vector4d::Zero();
  double best = 0.0;
  for (int i = 0; i < 4; ++i) {
    if (i == used) continue;
    Eigen::Vector4d cand = project(Eigen::Vector4d::Unit(i));
    const double s = omega2(w1, cand);
    if (std::fabs(s) > std::fabs(best)) {
      best = s;
      w2 = cand;
    }
  }
  if (std::fabs(best) < 1e-12) throw NumericError("transverse frame is degenerate");
  w2 /= best;  // now omega(w1, w2) = 1

  const Eigen::Vector4d m1 = M * w1;
  const Eigen::Vector4d m2 = M * w2;
  Eigen::Matrix2d B;
  B(0, 0) = omega2(m1, w2);
  B(0, 1) = omega2(m2, w2);
  B(1, 0) = -omega2(m1, w1);
  B(1, 1) = -omega2(m2, w1);
  return B;
}

PeriodicOrbit finish_po(const PesModel& pes, PoClass kind, const PhasePoint& z0,
                        double period, const PoOptions& opt) {
  if (!(period > 0.0)) throw NumericError("periodic orbit has a non-positive period");
  auto samples = variational_flow(z0, pes, period, opt.tol, opt.n_finish_samples);
  const FlowSample& last = samples.back();

  double p_scale = 1.0;
  for (const auto& s : samples)
    p_scale = std::max({p_scale, std::fabs(s.z.pR), std::fabs(s.z.pth)});
  const double dR = last.z.R - z0.R;
  const double dth = wrap_angle(last.z.th - z0.th);
  const double dpR = (last.z.pR - z0.pR) / p_scale;
  const double dpth = (last.z.pth - z0.pth) / p_scale;
  const double closure = std::sqrt(dR * dR + dth * dth + dpR * dpR + dpth * dpth);
  if (closure > 1e-6)
    throw NumericError("periodic orbit failed to close, residual " +
                       std::to_string(closure));

  PeriodicOrbit po;
  po.kind = kind;
  po.z0 = z0;
  po.period = period;
  po.energy = hamiltonian(z0, pes);
  po.action = last.action;
  po.monodromy = last.M;

  const Eigen::Matrix4d J = symplectic_j();
  const Eigen::Matrix4d resid = po.monodromy.transpose() * J * po.monodromy - J;
  const double mscale = std::max(1.0, po.monodromy.squaredNorm());
  if (resid.cwiseAbs().maxCoeff() > 1e-7 * mscale)
    throw NumericError("monodromy lost symplecticity");

  const Eigen::Vector4d xd = flow_vec(z0, pes);
  if ((po.monodromy * xd - xd).norm() > 1e-5 * std::max(1.0, po.monodromy.norm()) * xd.norm())
    throw NumericError("monodromy lost the flow eigenvector");

  const Eigen::Matrix2d B = transverse_block(po.monodromy, z0, pes);
  po.tr_transverse = B.trace();
  const double tr_full = po.monodromy.trace();
  if (std::fabs(po.tr_transverse - (tr_full - 2.0)) >
      1e-6 * std::max(4.0, std::fabs(tr_full)))
    throw NumericError("transverse reduction disagrees with the full trace");

  po.stable = std::fabs(po.tr_transverse) <= 2.0;
  if (po.stable) {
    po.nu_s = std::acos(std::clamp(po.tr_transverse / 2.0, -1.0, 1.0));
  } else {
    po.lambda_u = std::acosh(std::fabs(po.tr_transverse) / 2.0) / period;
  }

  WindingInfo w;
  try {
    w = winding_from_samples(samples, pes);
  } catch (const NumericError&) {
    auto dense = variational_flow(z0, pes, period, opt.tol, 4 * opt.n_finish_samples);
    w = winding_from_samples(dense, pes);
  }
  if (w.mu != w.mu_angle)
    throw NumericError("winding routes disagree: brakes " + std::to_string(w.mu) +
                       " vs angle " + std::to_string(w.mu_angle));
  po.winding = w.mu;
  po.n_brakes = w.n_brakes;
  po.n_conjugate = w.n_conjugate;
  // The section-map finder can land on a self-retracing orbit; circulating
  // orbits never stop, so any brake reclassifies it.
  if (po.kind == PoClass::rotation && po.n_brakes > 0) po.kind = PoClass::libration;
  return po;
}

// Minimum of V along the invariant line, Newton-refined from a coarse scan.
double line_minimum(const PesModel& pes, double theta_line, double r_guess) {
  double Rc = r_guess;
  if (!(Rc > pes.r_lo() && Rc < pes.r_hi())) {
    double best = pes.r_lo();
    double best_v = pes.value(best, theta_line);
    for (int i = 1; i <= 64; ++i) {
      const double R = pes.r_lo() + (pes.r_hi() - pes.r_lo()) * i / 64.0;
      const double v = pes.value(R, theta_line);
      if (v < best_v) {
        best_v = v;
        best = R;
      }
    }
    Rc = best;
  }
  for (int i = 0; i < 100; ++i) {
    double vR, vth, hRR, hRt, htt;
    pes.gradient(Rc, theta_line, vR, vth);
    pes.hessian(Rc, theta_line, hRR, hRt, htt);
    if (hRR <= 0.0) throw NumericError("line minimum search hit a non-convex region");
    const double step = std::clamp(vR / hRR, -0.2, 0.2);
    Rc -= step;
    if (std::fabs(step) < 1e-14) break;
  }
  return Rc;
}

// Inner turning point of the 1-DOF R motion at the given energy.
double inner_turning_point(const PesModel& pes, double theta_line, double energy,
                           double Rc) {
  double lo = pes.r_lo() + 1e-9, hi = Rc;
  if (pes.value(lo, theta_line) <= energy)
    throw ConfigError("energy reaches the inner edge of the R domain");
  if (pes.value(hi, theta_line) >= energy)
    throw ConfigError("energy is below the line minimum");
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (pes.value(mid, theta_line) > energy ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

PeriodicOrbit solve_stretch(const PesModel& pes, PoSeed& seed, double energy,
                            const PoOptions& opt) {
  const double Rc = line_minimum(pes, seed.theta_line, seed.R0);
  const double Rin = inner_turning_point(pes, seed.theta_line, energy, Rc);
  const PhasePoint z0{Rin, seed.theta_line, 0.0, 0.0};
  EventFn g = [](double, const PhasePoint& z) { return z.pR; };
  EventCrossing ev;
  if (!integrate_to_event(z0, pes, g, -1, 0, opt.t_cap, opt.tol, ev))
    throw NumericError("stretch orbit: outer turning point not reached in time");
  seed.R0 = Rc;
  return finish_po(pes, PoClass::stretch, z0, 2.0 * ev.t, opt);
}

PeriodicOrbit solve_bend(const PesModel& pes, PoSeed& seed, double energy,
                         const PoOptions& opt) {
  if (!(seed.R0 > 0.0)) throw ConfigError("bend orbit search needs an R guess");
  const double thL = seed.theta_line;

  auto shoot = [&](double R, double& t_half) {
    const double K = energy - pes.value(R, thL);
    if (K <= 0.0) throw NumericError("bend shoot left the well");
    const double pth = std::sqrt(K / pes.b(R));
    const PhasePoint z0{R, thL, 0.0, pth};
    EventFn g = [thL](double, const PhasePoint& z) { return z.th - thL; };
    EventCrossing ev;
    if (!integrate_to_event(z0, pes, g, 0, seed.k_event - 1, opt.t_cap, opt.tol, ev))
      throw NumericError("bend shoot: symmetry line not re-crossed in time");
    t_half = ev.t;
    return ev.z.pR;
  };

  double R = seed.R0;
  double t_half = 0.0;
  double f = shoot(R, t_half);
  const double p_ref = std::max(1.0, std::sqrt(2.0 * pes.mass_r() * std::fabs(energy)));
  for (int it = 0; it < opt.max_iter && std::fabs(f) > opt.shoot_tol * p_ref; ++it) {
    const double h = 1e-7 * std::max(1.0, std::fabs(R));
    double tdump;
    const double fp = shoot(R + h, tdump);
    const double df = (fp - f) / h;
    if (std::fabs(df) < 1e-14) break;
    double step = std::clamp(-f / df, -0.1, 0.1);
    for (int bt = 0; bt < 8; ++bt) {
      try {
        double t_new;
        const double f_new = shoot(R + step, t_new);
        if (std::fabs(f_new) < std::fabs(f) || bt == 7) {
          R += step;
          f = f_new;
          t_half = t_new;
          break;
        }
      } catch (const NumericError&) {
      }
      step *= 0.5;
    }
  }
  auto finish_at = [&](double R_root, double t_half_root) {
    const double pth = std::sqrt((energy - pes.value(R_root, thL)) / pes.b(R_root));
    return finish_po(pes, PoClass::bend_symmetric,
                     PhasePoint{R_root, thL, 0.0, pth}, 2.0 * t_half_root, opt);
  };

  // A converged residual is necessary but not sufficient: resonant loop
  // orbits also pierce the line with P_R = 0 but never brake. Only a
  // self-retracing solution (exactly two brakes) belongs to this family.
  if (std::fabs(f) <= opt.shoot_tol * p_ref) {
    const PeriodicOrbit po = finish_at(R, t_half);
    if (po.n_brakes == 2) {
      seed.R0 = R;
      return po;
    }
  }

  // Newton failed or landed on the wrong family. Sample the residual over
  // an expanding window, bisect every bracket, keep the first root that
  // finishes as a genuine libration.
  const double r_center = R;
  std::vector<double> grid, fval;
  for (double d = -0.45; d <= 0.451; d += 0.02) {
    const double rc = r_center + d;
    double tc, fc;
    try {
      fc = shoot(rc, tc);
    } catch (const NumericError&) {
      continue;
    }
    grid.push_back(rc);
    fval.push_back(fc);
  }
  for (size_t i = 1; i < grid.size(); ++i) {
    if (!(fval[i - 1] * fval[i] < 0.0)) continue;
    double ra = grid[i - 1], rb = grid[i], fa = fval[i - 1];
    double rm = ra, fm = fa, tm = 0.0;
    for (int it = 0; it < 200 && std::fabs(fm) > opt.shoot_tol * p_ref; ++it) {
      rm = 0.5 * (ra + rb);
      fm = shoot(rm, tm);
      if (fm * fa <= 0.0) {
        rb = rm;
      } else {
        ra = rm;
        fa = fm;
      }
    }
    if (std::fabs(fm) > opt.shoot_tol * p_ref) continue;  // jump, not a root
    try {
      const PeriodicOrbit po = finish_at(rm, tm);
      if (po.n_brakes == 2) {
        seed.R0 = rm;
        return po;
      }
    } catch (const NumericError&) {
    }
  }
  throw NumericError("cross-line orbit did not converge at E = " +
                     std::to_string(to_cm1(energy)) + " cm^-1");
}

PeriodicOrbit solve_libration(const PesModel& pes, PoSeed& seed, double energy,
                              const PoOptions& opt) {
  if (!(seed.R0 > 0.0)) throw ConfigError("libration search needs (R, theta) guesses");

  const double e_scale = std::max(std::fabs(energy), 1e-4);
  const double p_ref = std::sqrt(2.0 * pes.mass_r() * e_scale);

  auto resid = [&](double R, double th, double& t_half) {
    const PhasePoint z0{R, th, 0.0, 0.0};
    EventFn g = [](double, const PhasePoint& z) { return z.pth; };
    EventCrossing ev;
    if (!integrate_to_event(z0, pes, g, 0, seed.k_event - 1, opt.t_cap, opt.tol, ev))
      throw NumericError("libration shoot: far turning point not reached in time");
    t_half = ev.t;
    return Eigen::Vector2d((pes.value(R, th) - energy) / e_scale, ev.z.pR / p_ref);
  };

  double R = seed.R0, th = seed.th0;
  double t_half = 0.0;
  Eigen::Vector2d f = resid(R, th, t_half);
  for (int it = 0; it < opt.max_iter && f.norm() > opt.shoot_tol; ++it) {
    const double hR = 1e-7 * std::max(1.0, std::fabs(R));
    const double ht = 1e-7;
    double tdump;
    const Eigen::Vector2d fR = resid(R + hR, th, tdump);
    const Eigen::Vector2d ft = resid(R, th + ht, tdump);
    Eigen::Matrix2d Jm;
    Jm.col(0) = (fR - f) / hR;
    Jm.col(1) = (ft - f) / ht;
    if (std::fabs(Jm.determinant()) < 1e-16)
      throw NumericError("libration shoot: singular jacobian");
    Eigen::Vector2d step = -Jm.inverse() * f;
    const double cap = 0.1;
    if (step.norm() > cap) step *= cap / step.norm();
    for (int bt = 0; bt < 8; ++bt) {
      try {
        double t_new;
        const Eigen::Vector2d f_new = resid(R + step(0), th + step(1), t_new);
        if (f_new.norm() < f.norm() || bt == 7) {
          R += step(0);
          th += step(1);
          f = f_new;
          t_half = t_new;
          break;
        }
      } catch (const NumericError&) {
      }
      step *= 0.5;
    }
  }
  if (f.norm() > opt.shoot_tol)
    throw NumericError("libration did not converge at E = " +
                       std::to_string(to_cm1(energy)) + " cm^-1");
  seed.R0 = R;
  seed.th0 = th;
  return finish_po(pes, PoClass::libration, PhasePoint{R, th, 0.0, 0.0},
                   2.0 * t_half, opt);
}

PeriodicOrbit solve_rotation(const PesModel& pes, const MinimumEnergyPath* mep,
                             PoSeed& seed, double energy, const PoOptions& opt) {
  if (!mep) throw ConfigError("rotation search needs the minimum energy path");
  if (seed.direction == 0) throw ConfigError("rotation search needs a crossing direction");

  auto ret = [&](double psi, double pp, double& t_ret) {
    const PhasePoint z = sos_lift(psi, pp, energy, pes, *mep, seed.direction);
    const SosResult r = poincare_section(z, pes, *mep, seed.k_event + 1,
                                         seed.direction, opt.t_cap, opt.tol);
    if (!r.complete) throw NumericError("return map ran out of time");
    const SosPoint& p = r.points[seed.k_event];
    t_ret = p.t;
    return Eigen::Vector2d(wrap_angle(p.psi - psi), p.p_psi - pp);
  };

  double psi = seed.psi0, pp = seed.p_psi0;
  const double p_scale = std::max(1.0, std::fabs(pp));
  double t_ret = 0.0;
  Eigen::Vector2d f = ret(psi, pp, t_ret);
  auto fnorm = [&](const Eigen::Vector2d& v) {
    return std::sqrt(v(0) * v(0) + v(1) * v(1) / (p_scale * p_scale));
  };
  for (int it = 0; it < opt.max_iter && fnorm(f) > opt.shoot_tol; ++it) {
    const double hp = 1e-6;
    const double hm = 1e-6 * p_scale;
    double tdump;
    const Eigen::Vector2d f1 = ret(psi + hp, pp, tdump);
    const Eigen::Vector2d f2 = ret(psi, pp + hm, tdump);
    Eigen::Matrix2d Jm;
    Jm.col(0) = (f1 - f) / hp;
    Jm.col(1) = (f2 - f) / hm;
    if (std::fabs(Jm.determinant()) < 1e-16)
      throw NumericError("return map jacobian is singular");
    Eigen::Vector2d step = -Jm.inverse() * f;
    if (std::fabs(step(0)) > 0.2) step *= 0.2 / std::fabs(step(0));
    if (std::fabs(step(1)) > 0.2 * p_scale) step *= 0.2 * p_scale / std::fabs(step(1));
    for (int bt = 0; bt < 8; ++bt) {
      try {
        double t_new;
        const Eigen::Vector2d f_new = ret(psi + step(0), pp + step(1), t_new);
        if (fnorm(f_new) < fnorm(f) || bt == 7) {
          psi += step(0);
          pp += step(1);
          f = f_new;
          t_ret = t_new;
          break;
        }
      } catch (const NumericError&) {
      }
      step *= 0.5;
    }
  }
  if (fnorm(f) > opt.shoot_tol)
    throw NumericError("rotation orbit did not converge at E = " +
                       std::to_string(to_cm1(energy)) + " cm^-1");
  seed.psi0 = psi;
  seed.p_psi0 = pp;
  const PhasePoint z0 = sos_lift(psi, pp, energy, pes, *mep, seed.direction);
  return finish_po(pes, PoClass::rotation, z0, t_ret, opt);
}

}  // namespace

double stability_exponent(const PeriodicOrbit& po) {
  if (po.stable)
    throw ConfigError("stability exponent requested for a stable orbit");
  return po.lambda_u;
}

double stability_angle(const PeriodicOrbit& po) {
  if (!po.stable)
    throw ConfigError("stability angle requested for an unstable orbit");
  return po.nu_s;
}

WindingInfo winding_from_samples(const std::vector<FlowSample>& samples,
                                 const PesModel& pes) {
  const int K = static_cast<int>(samples.size()) - 1;
  if (K < 16) throw ConfigError("winding: too few samples");

  const double wR = std::sqrt(pes.mass_r());
  std::vector<Eigen::Vector2d> vmw(K + 1);
  double vmax = 0.0;
  for (int k = 0; k <= K; ++k) {
    const PhasePoint& z = samples[k].z;
    vmw[k] = {z.pR / wR, z.pth * std::sqrt(2.0 * pes.b(z.R))};
    vmax = std::max(vmax, vmw[k].norm());
  }
  if (!(vmax > 0.0)) throw NumericError("winding: orbit has no motion");

  // Sign-continuous direction of motion, seeded at the fastest sample.
  std::vector<Eigen::Vector2d> u(K + 1);
  int k_seed = 0;
  for (int k = 0; k <= K; ++k)
    if (vmw[k].norm() > vmw[k_seed].norm()) k_seed = k;
  u[k_seed] = vmw[k_seed].normalized();
  for (int off = 1; off <= K; ++off) {
    const int k = (k_seed + off) % (K + 1);
    const int kp = (k_seed + off - 1) % (K + 1);
    if (vmw[k].norm() > 1e-9 * vmax) {
      Eigen::Vector2d cand = vmw[k].normalized();
      u[k] = (cand.dot(u[kp]) < 0.0) ? Eigen::Vector2d(-cand) : cand;
    } else {
      u[k] = u[kp];
    }
  }

  WindingInfo info;
  info.t.resize(K + 1);
  info.mu_t.resize(K + 1);

  std::vector<double> a(K + 1);
  for (int k = 0; k <= K; ++k) a[k] = vmw[k].dot(u[k]);

  // Brake points: transversal zeros of the signed speed, counted cyclically
  // on the K distinct samples.
  const double a_floor = 1e-9 * vmax;
  int n_brakes = 0;
  int last_sign = 0;
  int first_sign = 0;
  for (int k = 0; k < K; ++k) {
    const int s = std::fabs(a[k]) > a_floor ? (a[k] > 0 ? 1 : -1) : 0;
    if (s == 0) continue;
    if (last_sign != 0 && s != last_sign) ++n_brakes;
    if (first_sign == 0) first_sign = s;
    last_sign = s;
  }
  if (last_sign != 0 && first_sign != 0 && last_sign != first_sign) ++n_brakes;
  info.n_brakes = n_brakes;
  info.mu = n_brakes;

  // Longitudinal angle: direction of (signed speed, along-track force).
  const double T = samples.back().t - samples.front().t;
  const double dt = T / K;
  const double b_scale = T / (2.0 * M_PI);
  std::vector<double> chi(K + 1);
  double prev = 0.0;
  for (int k = 0; k <= K; ++k) {
    const int kp = (k == 0 ? K - 1 : k - 1);
    const int kn = (k == K ? 1 : k + 1);
    const double da = (a[kn] - a[kp]) / (2.0 * dt) * b_scale;
    double ang = std::atan2(da, a[k]);
    if (k == 0) {
      chi[0] = ang;
      prev = ang;
      continue;
    }
    while (ang - prev > M_PI) ang -= 2.0 * M_PI;
    while (ang - prev < -M_PI) ang += 2.0 * M_PI;
    if (std::fabs(ang - prev) > M_PI / 2.0)
      throw NumericError("winding: angle tracking step too coarse");
    chi[k] = ang;
    prev = ang;
  }
  for (int k = 0; k <= K; ++k) {
    info.t[k] = samples[k].t;
    info.mu_t[k] = std::fabs(chi[k] - chi[0]) / M_PI;
  }
  const double turns = std::fabs(chi[K] - chi[0]) / M_PI;
  info.mu_angle = static_cast<int>(std::lround(turns));
  if (std::fabs(turns - info.mu_angle) > 0.05)
    throw NumericError("winding: angle sweep is not an integer number of half turns");

  // Transverse focusing: zeros of the Jacobi field launched with a unit
  // transverse momentum kick.
  Eigen::Vector2d n0(-u[0](1), u[0](0));
  const double wth0 = std::sqrt(0.5 / pes.b(samples[0].z.R));
  Eigen::Vector4d dz0(0.0, 0.0, n0(0) * wR, n0(1) * wth0);
  double xi_max = 0.0;
  std::vector<double> xi(K + 1);
  for (int k = 0; k <= K; ++k) {
    const Eigen::Vector4d dz = samples[k].M * dz0;
    const Eigen::Vector2d nk(-u[k](1), u[k](0));
    const double wth = std::sqrt(0.5 / pes.b(samples[k].z.R));
    xi[k] = wR * dz(0) * nk(0) + wth * dz(1) * nk(1);
    xi_max = std::max(xi_max, std::fabs(xi[k]));
  }
  int n_conj = 0;
  int sgn = 0;
  for (int k = 1; k <= K; ++k) {
    if (std::fabs(xi[k]) < 1e-9 * xi_max) continue;
    const int s = xi[k] > 0 ? 1 : -1;
    if (sgn != 0 && s != sgn) ++n_conj;
    sgn = s;
  }
  info.n_conjugate = n_conj;
  return info;
}

PoSampling sample_orbit(const PeriodicOrbit& po, const PesModel& pes,
                        int n_samples, double tol) {
  int n = std::max(n_samples, 64);
  for (int attempt = 0; attempt < 4; ++attempt) {
    PoSampling s;
    s.samples = variational_flow(po.z0, pes, po.period, tol, n);
    try {
      s.winding = winding_from_samples(s.samples, pes);
      return s;
    } catch (const NumericError&) {
      n *= 2;
    }
  }
  throw NumericError("orbit sampling failed to resolve the winding angles");
}

PeriodicOrbit solve_po(const PesModel& pes, const MinimumEnergyPath* mep,
                       PoSeed& seed, double energy, const PoOptions& opt) {
  switch (seed.kind) {
    case PoClass::stretch:
      return solve_stretch(pes, seed, energy, opt);
    case PoClass::bend_symmetric:
      return solve_bend(pes, seed, energy, opt);
    case PoClass::libration:
      return solve_libration(pes, seed, energy, opt);
    case PoClass::rotation:
      return solve_rotation(pes, mep, seed, energy, opt);
  }
  throw ConfigError("unknown orbit class");
}

PoFamily continue_family(const PesModel& pes, const MinimumEnergyPath* mep,
                         PoSeed seed, const std::vector<double>& energies,
                         const PoOptions& opt) {
  if (energies.empty()) throw ConfigError("family continuation needs energies");
  PoFamily fam;
  fam.seed = seed;
  for (const double e : energies) {
    PeriodicOrbit po;
    try {
      po = solve_po(pes, mep, fam.seed, e, opt);
    } catch (const std::exception& ex) {
      if (fam.members.empty()) throw;
      fam.truncated = true;
      fam.truncation_reason = ex.what();
      break;
    }
    if (!fam.members.empty()) {
      const double prev = std::fabs(fam.members.back().tr_transverse) - 2.0;
      const double cur = std::fabs(po.tr_transverse) - 2.0;
      if (prev * cur < 0.0)
        fam.bifurcation_marks.push_back(0.5 * (fam.members.back().energy + po.energy));
    }
    fam.members.push_back(po);
  }
  return fam;
}

std::vector<BsLevel> bs_quantize(const std::function<PeriodicOrbit(double)>& po_at,
                                 double e_lo, double e_hi, int stride) {
  if (!(e_hi > e_lo)) throw ConfigError("quantization window is empty");
  if (stride != 1 && stride != 2) throw ConfigError("quantization stride must be 1 or 2");

  auto gamma_of = [](const PeriodicOrbit& po) {
    return po.action / hbar - po.winding * M_PI / 2.0;
  };

  PeriodicOrbit lo = po_at(e_lo);
  PeriodicOrbit hi = po_at(e_hi);
  if (lo.winding != hi.winding)
    throw NumericError("orbit family changes winding across the window");
  const int mu_ref = lo.winding;
  const double g_lo = gamma_of(lo);
  const double g_hi = gamma_of(hi);
  if (!(g_hi > g_lo)) throw NumericError("orbit action is not increasing in energy");

  long m_min = static_cast<long>(std::ceil(g_lo / (2.0 * M_PI) - 1e-12));
  long m_max = static_cast<long>(std::floor(g_hi / (2.0 * M_PI) + 1e-12));
  if (m_min < 0) m_min = 0;

  std::vector<BsLevel> levels;
  for (long m = m_min; m <= m_max; ++m) {
    if (stride == 2 && (m % 2) != 0) continue;
    // Bracketed Newton on gamma(E) = 2 pi m.
    double ea = e_lo, eb = e_hi;
    double e = e_lo + (e_hi - e_lo) * (2.0 * M_PI * m - g_lo) / (g_hi - g_lo);
    PeriodicOrbit po;
    bool done = false;
    for (int it = 0; it < 60; ++it) {
      e = std::clamp(e, ea, eb);
      po = po_at(e);
      if (po.winding != mu_ref)
        throw NumericError("quantization left the orbit family at E = " +
                           std::to_string(to_cm1(e)) + " cm^-1");
      const double g = gamma_of(po) - 2.0 * M_PI * m;
      if (std::fabs(g) < 1e-9) {
        done = true;
        break;
      }
      (g < 0.0 ? ea : eb) = e;
      const double e_newton = e - g * hbar / po.period;
      e = (e_newton > ea && e_newton < eb) ? e_newton : 0.5 * (ea + eb);
    }
    if (!done) throw NumericError("quantization did not converge for level " +
                                  std::to_string(m));
    BsLevel lev;
    lev.n = static_cast<int>(stride == 2 ? m / 2 : m);
    lev.energy = po.energy;
    lev.period = po.period;
    lev.action = po.action;
    lev.mu = po.winding;
    levels.push_back(lev);
  }
  return levels;
}

double line_action(const PesModel& pes, double theta_line, double energy,
                   const PoOptions& opt) {
  PoSeed seed;
  seed.kind = PoClass::stretch;
  seed.theta_line = theta_line;
  return solve_po(pes, nullptr, seed, energy, opt).action;
}

}  // namespace scarbasis
