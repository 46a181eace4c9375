#include "flightopt/flight_dyn.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <iomanip>
#include <ostream>

namespace flightopt {

namespace {

VecX generalized_velocity(const Vec3& v_b, const Vec3& omega, const VecX& qdot) {
  VecX nu(qdot.size() + 6);
  nu << v_b, omega, qdot;
  return nu;
}

LimbMomenta group_momenta(const RobotModel& model, const Kinematics& kin, const CentroidalMap& cmap,
                          const VecX& nu) {
  const BodyMomenta bodies = body_momenta(model, kin, nu);
  LimbMomenta out;
  out.groups.assign(model.limb_names().size() + 1, Vec3::Zero());
  for (int b = 0; b < model.num_bodies(); ++b) {
    const int limb = model.bodies()[b].limb;
    if (limb >= 0) out.groups[limb] += bodies.angular[b];
  }
  out.total = centroidal_momentum(cmap, nu).k_G;
  Vec3 limbs = Vec3::Zero();
  for (std::size_t g = 0; g + 1 < out.groups.size(); ++g) limbs += out.groups[g];
  out.groups.back() = out.total - limbs;
  return out;
}

}  // namespace

FlightInitialState initial_state(const Quat& theta0, const Vec3& omega0, const TrajectoryMatrix& traj) {
  return {theta0, omega0, eval(traj, 0.0), eval_rate(traj, 0.0)};
}

Vec3 flight_momentum(const RobotModel& model, const FlightInitialState& init) {
  check_configuration(model, init.qdot0);
  const CentroidalMap cmap = compute_centroidal_map(model, init.theta0, init.q0);
  return cmap.A_omega * init.omega0 + cmap.A_j * init.qdot0;
}

Vec3 flight_momentum(const RobotModel& model, const FlightInitialState& init, const Vec3& base_velocity) {
  check_configuration(model, init.qdot0);
  const CentroidalMap cmap = compute_centroidal_map(model, init.theta0, init.q0);
  return centroidal_momentum(cmap, generalized_velocity(base_velocity, init.omega0, init.qdot0)).k_G;
}

namespace {

Vec3 solve_rate(const Mat3& A_omega, const Vec3& rhs) {
  const Eigen::LDLT<Mat3> ldlt(A_omega);
  const Vec3 d = ldlt.vectorD().cwiseAbs();
  if (ldlt.info() != Eigen::Success || !(d.minCoeff() > 1e-12 * d.maxCoeff())) {
    throw NumericalError("A_omega is numerically singular; check the model inertias");
  }
  return ldlt.solve(rhs);
}

}  // namespace

Vec3 body_rate(const CentroidalMap& cmap, const Vec3& k_Gf, const VecX& qdot) {
  if (qdot.size() != cmap.A_j.cols()) throw InputError("joint velocity has wrong size");
  return solve_rate(cmap.A_omega, k_Gf - cmap.A_j * qdot);
}

Quat quaternion_rate(const Quat& theta, const Vec3& omega) {
  const Quat w(0.0, omega.x(), omega.y(), omega.z());
  Quat rate = w * theta;
  rate.coeffs() *= 0.5;
  return rate;
}

Quat quaternion_euler_step(const Quat& theta, const Vec3& omega, double dt) {
  Quat next;
  next.coeffs() = theta.coeffs() + dt * quaternion_rate(theta, omega).coeffs();
  next.normalize();
  return next;
}

double rotation_angle(const Quat& theta) {
  return 2.0 * std::atan2(theta.vec().norm(), std::abs(theta.w()));
}

LimbMomenta limb_contributions(const RobotModel& model, const Quat& theta, const VecX& q,
                               const Vec3& omega_b, const VecX& qdot) {
  check_configuration(model, qdot);
  const Kinematics kin = forward_kinematics(model, theta, q);
  const CentroidalMap cmap = compute_centroidal_map(model, kin);
  return group_momenta(model, kin, cmap, generalized_velocity(Vec3::Zero(), omega_b, qdot));
}

FlightOutcome integrate_orientation(const RobotModel& model, const FlightInitialState& init,
                                    const TrajectoryMatrix& traj, int steps,
                                    const IntegrationOptions& options) {
  if (steps < 1) throw InputError("integration needs at least one step");
  if (!(traj.t_f > 0.0)) throw InputError("trajectory horizon must be positive");
  check_configuration(model, init.q0);
  check_configuration(model, init.qdot0);
  if (traj.num_joints() != model.num_joints()) throw InputError("trajectory does not match the model");
  if (!(init.q0 - eval(traj, 0.0)).isZero(1e-9) || !(init.qdot0 - eval_rate(traj, 0.0)).isZero(1e-9)) {
    throw InputError("initial joint state is inconsistent with the trajectory at t = 0");
  }

  const auto base_velocity = [&](double t) -> Vec3 {
    return options.base_velocity ? options.base_velocity(t) : Vec3::Zero();
  };

  FlightOutcome out;
  Kinematics kin;
  CentroidalScratch scratch;
  forward_kinematics(model, init.theta0, init.q0, kin);
  AngularTerms terms = angular_momentum_terms(model, kin, init.qdot0, scratch);
  const Vec3 v0 = base_velocity(0.0);
  out.k_Gf = terms.A_v * v0 + terms.A_omega * init.omega0 + terms.joint_momentum;

  const auto record = [&](double t, const Quat& theta, const Vec3& omega, const Vec3& v_b,
                          const VecX& q, const VecX& qdot) {
    const VecX nu = generalized_velocity(v_b, omega, qdot);
    const CentroidalMap cmap = compute_centroidal_map(model, kin);
    FlightSample s;
    s.t = t;
    s.theta = theta;
    s.omega = omega;
    s.k_G = body_momenta(model, kin, nu).total_angular;
    s.group_momenta = group_momenta(model, kin, cmap, nu).groups;
    s.q = q;
    s.qdot = qdot;
    out.log.samples.push_back(std::move(s));
  };

  if (options.record_log) {
    out.log.group_names = model.group_names();
    out.log.joint_names = model.joint_names();
    out.log.k_Gf = out.k_Gf;
    out.log.samples.reserve(steps + 1);
    record(0.0, init.theta0, init.omega0, v0, init.q0, init.qdot0);
  }

  Quat theta = init.theta0;
  Vec3 omega = init.omega0;
  const double dt = traj.t_f / steps;
  VecX q;
  VecX qdot;
  for (int k = 1; k <= steps; ++k) {
    theta = quaternion_euler_step(theta, omega, dt);
    const double t = k == steps ? traj.t_f : k * dt;
    eval(traj, t, q);
    eval_rate(traj, t, qdot);
    forward_kinematics(model, theta, q, kin);
    terms = angular_momentum_terms(model, kin, qdot, scratch);
    const Vec3 v_b = base_velocity(t);
    omega = solve_rate(terms.A_omega, out.k_Gf - terms.A_v * v_b - terms.joint_momentum);
    if (options.record_log) record(t, theta, omega, v_b, q, qdot);
  }
  out.theta_tf = theta;
  out.omega_tf = omega;
  return out;
}

void write_flight_csv(std::ostream& out, const FlightLog& log) {
  out << "t,qw,qx,qy,qz,wx,wy,wz,kx,ky,kz";
  for (const auto& g : log.group_names) out << ",k_" << g << "_x,k_" << g << "_y,k_" << g << "_z";
  for (const auto& j : log.joint_names) out << ",q_" << j;
  for (const auto& j : log.joint_names) out << ",qd_" << j;
  out << '\n';
  const auto flags = out.flags();
  const auto precision = out.precision();
  out << std::setprecision(17);
  for (const auto& s : log.samples) {
    out << s.t << ',' << s.theta.w() << ',' << s.theta.x() << ',' << s.theta.y() << ','
        << s.theta.z() << ',' << s.omega.x() << ',' << s.omega.y() << ',' << s.omega.z() << ','
        << s.k_G.x() << ',' << s.k_G.y() << ',' << s.k_G.z();
    for (const auto& g : s.group_momenta) out << ',' << g.x() << ',' << g.y() << ',' << g.z();
    for (int j = 0; j < s.q.size(); ++j) out << ',' << s.q[j];
    for (int j = 0; j < s.qdot.size(); ++j) out << ',' << s.qdot[j];
    out << '\n';
  }
  out.flags(flags);
  out.precision(precision);
}

}  // namespace flightopt
