#pragma once

// Flight-phase base orientation dynamics. With no contact the centroidal
// angular momentum k_Gf is constant, so the base rate follows from
//   omega_b = A_omega^-1 (k_Gf - A_j qdot)
// and the orientation is integrated with a fixed-step explicit Euler sweep on
// the quaternion rate.

#include "flightopt/poly_traj.hpp"
#include "flightopt/rbd.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace flightopt {

struct FlightInitialState {
  Quat theta0 = Quat::Identity();
  Vec3 omega0 = Vec3::Zero();
  VecX q0;
  VecX qdot0;
};

/// Initial state consistent with the trajectory at t = 0.
FlightInitialState initial_state(const Quat& theta0, const Vec3& omega0, const TrajectoryMatrix& traj);

/// k_Gf = A_omega omega0 + A_j qdot0.
Vec3 flight_momentum(const RobotModel& model, const FlightInitialState& init);
/// Full A_k nu including the base translational velocity.
Vec3 flight_momentum(const RobotModel& model, const FlightInitialState& init, const Vec3& base_velocity);

/// Solves A_omega omega_b = k_Gf - A_j qdot. Throws NumericalError when
/// A_omega is numerically singular.
Vec3 body_rate(const CentroidalMap& cmap, const Vec3& k_Gf, const VecX& qdot);

/// World-frame quaternion rate: d/dt theta = 1/2 [0, omega] * theta.
Quat quaternion_rate(const Quat& theta, const Vec3& omega);
/// theta + dt * rate, renormalized.
Quat quaternion_euler_step(const Quat& theta, const Vec3& omega, double dt);
/// Geodesic rotation angle of a unit quaternion, in [0, pi].
double rotation_angle(const Quat& theta);

/// Angular momentum about the CoM split by limb. `groups` follows
/// model.group_names(): one entry per limb, then the torso remainder.
struct LimbMomenta {
  std::vector<Vec3> groups;
  Vec3 total = Vec3::Zero();
};

LimbMomenta limb_contributions(const RobotModel& model, const Quat& theta, const VecX& q,
                               const Vec3& omega_b, const VecX& qdot);

struct FlightSample {
  double t = 0.0;
  Quat theta = Quat::Identity();
  Vec3 omega = Vec3::Zero();
  Vec3 k_G = Vec3::Zero();          // per-body recomputation
  std::vector<Vec3> group_momenta;  // see LimbMomenta
  VecX q;
  VecX qdot;
};

struct FlightLog {
  std::vector<std::string> group_names;
  std::vector<std::string> joint_names;
  Vec3 k_Gf = Vec3::Zero();
  std::vector<FlightSample> samples;
};

struct FlightOutcome {
  Quat theta_tf = Quat::Identity();
  Vec3 omega_tf = Vec3::Zero();
  Vec3 k_Gf = Vec3::Zero();
  FlightLog log;  // empty unless requested
};

struct IntegrationOptions {
  bool record_log = true;
  // Base translational velocity along the flight; enters only through A_v.
  std::function<Vec3(double)> base_velocity;
};

/// Fixed-step sweep with `steps` steps of t_f / steps over the trajectory
/// horizon. The log holds steps + 1 samples, t = 0 included.
FlightOutcome integrate_orientation(const RobotModel& model, const FlightInitialState& init,
                                    const TrajectoryMatrix& traj, int steps,
                                    const IntegrationOptions& options = {});

/// Columns: t, qw, qx, qy, qz, wx, wy, wz, kx, ky, kz, then k_<group>_{x,y,z}
/// per momentum group, then q_<joint> and qd_<joint> per joint.
void write_flight_csv(std::ostream& out, const FlightLog& log);

}  // namespace flightopt
