#include "ctbc/dynamics.hpp"

#include <Eigen/Cholesky>
#include <cmath>

namespace ctbc {

namespace {

constexpr double kGravity = 9.81;
constexpr double kTangentK = 2.0e4;   // N/m, tangential bristle stiffness
constexpr double kTangentC = 150.0;   // N s/m, tangential damping
constexpr double kDivergenceBound = 1e3;

using Mat7 = Eigen::Matrix<double, 7, 7>;
using Vec7 = Eigen::Matrix<double, 7, 1>;
using Jac = Eigen::Matrix<double, 2, 7>;  // point Jacobian over [x z th hL kL hR kR]

struct PointKin {
  Eigen::Vector2d pos;
  Jac jac;
  Eigen::Vector2d bias;  // Jdot * qdot
};

inline Eigen::Vector2d dir(double phi) { return {std::sin(phi), -std::cos(phi)}; }
inline Eigen::Vector2d ddir(double phi) { return {std::cos(phi), std::sin(phi)}; }

// Kinematics of the lumped masses: base com + per leg thigh mid, shank mid,
// wheel axle.
struct ChainKin {
  PointKin base_com;
  PointKin thigh_mid[kNumLegs];
  PointKin shank_mid[kNumLegs];
  PointKin foot[kNumLegs];
  PointKin knee[kNumLegs];

  ChainKin(const RobotModel& m, const SimState& s) {
    const double th = s.base.pitch, thd = s.base_vel[2];
    const Eigen::Vector2d hip(s.base.x, s.base.z);

    // base com rotates about the hip pivot
    const Eigen::Vector2d c(m.base_com_offset.x, m.base_com_offset.z);
    const double ct = std::cos(th), st = std::sin(th);
    const Eigen::Vector2d rc(ct * c.x() - st * c.y(), st * c.x() + ct * c.y());
    const Eigen::Vector2d drc(-rc.y(), rc.x());  // d(rc)/dth
    base_com.pos = hip + rc;
    base_com.jac.setZero();
    base_com.jac(0, 0) = 1.0;
    base_com.jac(1, 1) = 1.0;
    base_com.jac.col(2) = drc;
    base_com.bias = -thd * thd * rc;

    for (int leg = 0; leg < kNumLegs; ++leg) {
      const int ih = 3 + 2 * leg, ik = 4 + 2 * leg;
      const double phi1 = th + s.q[2 * leg];
      const double phi2 = phi1 + s.q[2 * leg + 1];
      const double phi1d = thd + s.qd[2 * leg];
      const double phi2d = phi1d + s.qd[2 * leg + 1];
      const Eigen::Vector2d u1 = dir(phi1), u2 = dir(phi2);
      const Eigen::Vector2d du1 = ddir(phi1), du2 = ddir(phi2);
      const double l1 = m.thigh_length, l2 = m.shank_length;

      auto fill = [&](PointKin& p, double a1, double a2) {
        p.pos = hip + a1 * u1 + a2 * u2;
        p.jac.setZero();
        p.jac(0, 0) = 1.0;
        p.jac(1, 1) = 1.0;
        const Eigen::Vector2d dth = a1 * du1 + a2 * du2;
        p.jac.col(2) = dth;
        p.jac.col(ih) = dth;
        p.jac.col(ik) = a2 * du2;
        p.bias = -(a1 * phi1d * phi1d) * u1 - (a2 * phi2d * phi2d) * u2;
      };
      fill(thigh_mid[leg], 0.5 * l1, 0.0);
      fill(knee[leg], l1, 0.0);
      fill(shank_mid[leg], l1, 0.5 * l2);
      fill(foot[leg], l1, l2);
    }
  }
};

Vec7 gen_velocity(const SimState& s) {
  Vec7 v;
  v << s.base_vel[0], s.base_vel[1], s.base_vel[2], s.qd[0], s.qd[1], s.qd[2], s.qd[3];
  return v;
}

// Sphere-vs-profile penalty contact shared by wheels and collision bodies.
// xi is the tangential bristle deflection carried across steps for sticking
// contacts; it is advanced elastoplastically and reset by the caller on
// contact break. Pass nullptr for transient (collision-body) contacts.
ContactInfo sphere_contact(const Profile& terrain, const RobotModel& model,
                           const Eigen::Vector2d& center, const Eigen::Vector2d& vel,
                           double spin, double radius, double dt, double* xi) {
  ContactInfo c;
  SurfacePoint sp = closest_surface_point(terrain, center.x(), center.y(), radius + 0.15);
  if (!sp.valid || sp.dist >= radius || sp.dist < 1e-9) return c;
  const Eigen::Vector2d n =
      (center - Eigen::Vector2d(sp.x, sp.z)) / sp.dist;
  // a center below the surface would flip the normal; reject downward normals
  if (n.y() < -0.5) return c;
  const double pen = radius - sp.dist;
  const double vn = vel.dot(n);
  double fn = model.contact_kn * pen - model.contact_cn * vn;
  if (fn <= 0.0) return c;
  const Eigen::Vector2d t(n.y(), -n.x());
  const Eigen::Vector2d rvec = -radius * n;  // center -> contact point
  const Eigen::Vector2d vcp = vel + spin * Eigen::Vector2d(-rvec.y(), rvec.x());
  const double slip = vcp.dot(t);
  // elastoplastic tangential bristle: spring-damper on the integrated slip,
  // projected back onto the friction cone when sliding. A pure slip-velocity
  // law cannot hold static load without creep; the spring can.
  const double fmax = model.friction * fn;
  double xi_local = xi ? *xi : 0.0;
  xi_local += slip * dt;
  double ft = -kTangentK * xi_local - kTangentC * slip;
  if (std::abs(ft) > fmax) {
    ft = std::copysign(fmax, ft);
    xi_local = -(ft + kTangentC * slip) / kTangentK;  // cone projection
  }
  if (xi) *xi = xi_local;
  const Eigen::Vector2d f = fn * n + ft * t;
  c.in_contact = true;
  c.fx = f.x();
  c.fz = f.y();
  c.moment = rvec.x() * f.y() - rvec.y() * f.x();
  c.slip = slip;
  c.penetration = pen;
  c.nx = n.x();
  c.nz = n.y();
  return c;
}

}  // namespace

bool SimState::finite() const {
  return std::isfinite(base.x) && std::isfinite(base.z) && std::isfinite(base.pitch) &&
         base_vel.allFinite() && q.allFinite() && qd.allFinite() &&
         wheel_angle.allFinite() && wheel_angvel.allFinite() &&
         wheel_integral.allFinite() && contact_xi.allFinite();
}

Eigen::Vector4d pd_torque(const RobotModel& model, const Eigen::Vector4d& q,
                          const Eigen::Vector4d& qd, const Eigen::Vector4d& targets) {
  Eigen::Vector4d tau =
      model.kp.cwiseProduct(targets - q) - model.kd.cwiseProduct(qd);
  return tau.cwiseMax(-model.leg_torque_limit).cwiseMin(model.leg_torque_limit);
}

Eigen::Vector2d wheel_torque(const RobotModel& model, const Eigen::Vector2d& angvel,
                             const Eigen::Vector2d& targets) {
  const Eigen::Vector2d t =
      targets.cwiseMax(-model.wheel_speed_limit).cwiseMin(model.wheel_speed_limit);
  Eigen::Vector2d tau = model.wheel_vel_gain * (t - angvel);
  return tau.cwiseMax(-model.wheel_torque_limit).cwiseMin(model.wheel_torque_limit);
}

std::array<ContactInfo, kNumLegs> resolve_contacts(const SimState& state,
                                                   const Profile& terrain,
                                                   const RobotModel& model) {
  if (!state.finite()) throw std::runtime_error("resolve_contacts: non-finite state");
  ChainKin kin(model, state);
  const Vec7 v = gen_velocity(state);
  std::array<ContactInfo, kNumLegs> out;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const Eigen::Vector2d vel = kin.foot[leg].jac * v;
    double xi = state.contact_xi[leg];  // query: do not advance the bristle
    out[leg] = sphere_contact(terrain, model, kin.foot[leg].pos, vel,
                              state.wheel_angvel[leg], model.wheel_radius, 0.0, &xi);
  }
  return out;
}

StepResult step(const SimState& state, const ActuatorCommand& command, double dt,
                const Profile& terrain, const RobotModel& model,
                std::optional<double> push_vx) {
  if (!(dt > 0.0 && dt <= 0.01))
    throw std::invalid_argument("step: dt must be in (0, 0.01]");

  StepResult res;
  res.next_state = state;
  SimState& s = res.next_state;

  if (!s.finite()) {
    res.diverged = true;
    return res;
  }

  ChainKin kin(model, s);
  const Vec7 v = gen_velocity(s);

  res.leg_torques = pd_torque(model, s.q, s.qd, command.leg_targets);

  // wheel velocity servo: PI with clamped integrator (anti-windup). The
  // integral term holds the wheels in place at zero command, which is what
  // makes a fore-aft stance statically stable on free-rolling wheels.
  {
    const Eigen::Vector2d tgt = command.wheel_targets
                                    .cwiseMax(-model.wheel_speed_limit)
                                    .cwiseMin(model.wheel_speed_limit);
    const Eigen::Vector2d err = tgt - s.wheel_angvel;
    s.wheel_integral = (s.wheel_integral + model.wheel_vel_ki * dt * err)
                           .cwiseMax(-model.wheel_torque_limit)
                           .cwiseMin(model.wheel_torque_limit);
    res.wheel_torques = (model.wheel_vel_gain * err + s.wheel_integral)
                            .cwiseMax(-model.wheel_torque_limit)
                            .cwiseMin(model.wheel_torque_limit);
  }

  // mass matrix and bias from the lumped masses
  Mat7 M = Mat7::Zero();
  Vec7 Q = Vec7::Zero();
  const Eigen::Vector2d grav(0.0, -kGravity);
  auto add_mass = [&](const PointKin& p, double m) {
    const Eigen::Matrix<double, 7, 2> Jt = m * p.jac.transpose();
    M.noalias() += Jt * p.jac;
    Q.noalias() += Jt * (grav - p.bias);
  };
  add_mass(kin.base_com, model.base_mass);
  for (int leg = 0; leg < kNumLegs; ++leg) {
    add_mass(kin.thigh_mid[leg], model.thigh_mass);
    add_mass(kin.shank_mid[leg], model.shank_mass);
    add_mass(kin.foot[leg], model.wheel_mass);
  }
  M(2, 2) += model.base_inertia;

  // joint torques act on their relative coordinates
  for (int j = 0; j < 4; ++j) Q[3 + j] += res.leg_torques[j];

  Eigen::Vector2d wheel_acc;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const int ih = 3 + 2 * leg, ik = 4 + 2 * leg;
    // drive reaction on the shank (absolute angle = pitch + hip + knee)
    const double tw = res.wheel_torques[leg];
    Q[2] -= tw;
    Q[ih] -= tw;
    Q[ik] -= tw;

    const Eigen::Vector2d fvel = kin.foot[leg].jac * v;
    res.foot_pos[leg] = {kin.foot[leg].pos.x(), kin.foot[leg].pos.y()};
    res.foot_vel[leg] = {fvel.x(), fvel.y()};
    ContactInfo c = sphere_contact(terrain, model, kin.foot[leg].pos, fvel,
                                   s.wheel_angvel[leg], model.wheel_radius, dt,
                                   &s.contact_xi[leg]);
    if (!c.in_contact) s.contact_xi[leg] = 0.0;
    res.contacts[leg] = c;
    if (c.in_contact)
      Q.noalias() += kin.foot[leg].jac.transpose() * Eigen::Vector2d(c.fx, c.fz);
    wheel_acc[leg] = (tw + c.moment) / model.wheel_inertia;

    // knee as a penalized collision body
    const Eigen::Vector2d kvel = kin.knee[leg].jac * v;
    ContactInfo kc = sphere_contact(terrain, model, kin.knee[leg].pos, kvel, 0.0, 0.06,
                                    dt, nullptr);
    if (kc.in_contact) {
      Q.noalias() += kin.knee[leg].jac.transpose() * Eigen::Vector2d(kc.fx, kc.fz);
      res.collision_forces[1 + leg] = std::hypot(kc.fx, kc.fz);
    }
  }
  // base collision body at the com
  {
    const Eigen::Vector2d bvel = kin.base_com.jac * v;
    ContactInfo bc = sphere_contact(terrain, model, kin.base_com.pos, bvel, 0.0, 0.12,
                                    dt, nullptr);
    if (bc.in_contact) {
      Q.noalias() += kin.base_com.jac.transpose() * Eigen::Vector2d(bc.fx, bc.fz);
      res.collision_forces[0] = std::hypot(bc.fx, bc.fz);
    }
  }

  const Vec7 acc = M.llt().solve(Q);

  // semi-implicit Euler
  const Vec7 vnew = v + dt * acc;
  s.base_vel << vnew[0], vnew[1], vnew[2];
  s.qd << vnew[3], vnew[4], vnew[5], vnew[6];
  s.base.x += dt * vnew[0];
  s.base.z += dt * vnew[1];
  s.base.pitch += dt * vnew[2];
  s.q += dt * s.qd;
  s.wheel_angvel += dt * wheel_acc;
  s.wheel_angle += dt * s.wheel_angvel;
  s.time += dt;
  if (push_vx) s.base_vel[0] += *push_vx;  // exact additive velocity push

  for (int leg = 0; leg < kNumLegs; ++leg) {
    s.contact_fx[leg] = res.contacts[leg].fx;
    s.contact_fz[leg] = std::max(0.0, res.contacts[leg].fz);
  }

  if (!s.finite() || std::abs(s.base.x) > kDivergenceBound ||
      std::abs(s.base.z) > kDivergenceBound || s.base_vel.cwiseAbs().maxCoeff() > kDivergenceBound ||
      s.qd.cwiseAbs().maxCoeff() > kDivergenceBound)
    res.diverged = true;
  return res;
}

double mechanical_energy(const SimState& state, const RobotModel& model) {
  ChainKin kin(model, state);
  const Vec7 v = gen_velocity(state);
  double e = 0.5 * model.base_inertia * state.base_vel[2] * state.base_vel[2];
  auto add = [&](const PointKin& p, double m) {
    const Eigen::Vector2d vel = p.jac * v;
    e += 0.5 * m * vel.squaredNorm() + m * kGravity * p.pos.y();
  };
  add(kin.base_com, model.base_mass);
  for (int leg = 0; leg < kNumLegs; ++leg) {
    add(kin.thigh_mid[leg], model.thigh_mass);
    add(kin.shank_mid[leg], model.shank_mass);
    add(kin.foot[leg], model.wheel_mass);
    e += 0.5 * model.wheel_inertia * state.wheel_angvel[leg] * state.wheel_angvel[leg];
  }
  return e;
}

SimState spawn_state(const RobotModel& model, const Profile& terrain, double x) {
  SimState s;
  s.q = model.default_pose;
  const double ground = terrain.height_at(x);
  s.base.x = x;
  s.base.z = ground + model.nominal_base_height;
  return s;
}

}  // namespace ctbc
