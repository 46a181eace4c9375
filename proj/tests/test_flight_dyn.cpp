#include "helpers.hpp"

#include "flightopt/flight_dyn.hpp"
#include "flightopt/poly_traj.hpp"

#include <doctest.h>

#include <sstream>

using namespace flightopt;
using namespace flightopt::testing;

namespace {

TrajectoryMatrix planar_swing(double t_f) {
  TrajectoryMatrix traj;
  traj.t_f = t_f;
  traj.gamma = MatX::Zero(2, 4);
  traj.gamma.row(0) << 20.0, -9.0, 1.5, 0.3;
  traj.gamma.row(1) << -15.0, 6.0, -2.0, -0.2;
  return traj;
}

double final_angle(const RobotModel& m, const TrajectoryMatrix& traj, int steps, const Quat& theta0 = Quat::Identity(),
                   const Vec3& omega0 = Vec3::Zero()) {
  IntegrationOptions options;
  options.record_log = false;
  const FlightOutcome out = integrate_orientation(m, initial_state(theta0, omega0, traj), traj, steps, options);
  return rotation_angle(out.theta_tf);
}

}  // namespace

TEST_CASE("flight momentum") {
  const RobotModel body = single_body(5.0, Vec3(1, 2, 3).asDiagonal());
  SUBCASE("rest") {
    const auto m = builtin("biped12");
    const TrajectoryMatrix traj = hold_trajectory(VecX::Constant(12, 0.2), 3, 0.3);
    CHECK(flight_momentum(*m, initial_state(Quat::Identity(), Vec3::Zero(), traj)).isZero(0.0));
  }
  SUBCASE("single body about a principal axis") {
    const TrajectoryMatrix traj = hold_trajectory(VecX(), 3, 0.3);
    const Vec3 k = flight_momentum(body, initial_state(Quat::Identity(), Vec3(0, 1, 0), traj));
    CHECK((k - Vec3(0, 2, 0)).norm() < 1e-15);
  }
  SUBCASE("base velocity does not enter") {
    std::mt19937_64 rng(1);
    const auto m = builtin("humanoid20");
    TrajectoryMatrix traj;
    traj.t_f = 0.3;
    traj.gamma = MatX::Zero(20, 4);
    for (int i = 0; i < 20; ++i) traj.gamma.row(i) = random_vec(rng, 4, 1.0).transpose();
    const FlightInitialState init = initial_state(random_quat(rng), random_vec(rng, 3, 1.0), traj);
    const Vec3 k = flight_momentum(*m, init);
    for (int trial = 0; trial < 10; ++trial) {
      CHECK((flight_momentum(*m, init, random_vec(rng, 3, 10.0)) - k).norm() < 1e-12);
    }
  }
}

TEST_CASE("body rate") {
  const RobotModel body = single_body(5.0, Vec3(1, 2, 3).asDiagonal());
  const CentroidalMap cmap = compute_centroidal_map(body, Quat::Identity(), VecX());
  CHECK(body_rate(cmap, Vec3::Zero(), VecX()).isZero(0.0));
  CHECK((body_rate(cmap, Vec3(0, 1, 0), VecX()) - Vec3(0, 0.5, 0)).norm() < 1e-15);
  CHECK_THROWS_AS(body_rate(cmap, Vec3::Zero(), VecX::Zero(2)), InputError);

  SUBCASE("swinging planar leg reproduces the momentum") {
    std::mt19937_64 rng(2);
    const auto m = builtin("planar3");
    for (int trial = 0; trial < 10; ++trial) {
      const Quat theta = random_quat(rng);
      const VecX q = random_vec(rng, 2, 1.0);
      const VecX qdot = random_vec(rng, 2, 3.0);
      const Vec3 k = random_vec(rng, 3, 2.0);
      const CentroidalMap c = compute_centroidal_map(*m, theta, q);
      const Vec3 w = body_rate(c, k, qdot);
      CHECK((c.A_omega * w + c.A_j * qdot - k).norm() < 1e-12);
    }
  }
}

TEST_CASE("body rate agrees with a fourth-order reference simulation") {
  const auto m = builtin("planar3");
  const TrajectoryMatrix traj = planar_swing(0.3);
  const Quat theta0(Eigen::AngleAxisd(0.2, Vec3::UnitX()));
  const Vec3 omega0(0.3, -0.5, 0.2);
  const FlightInitialState init = initial_state(theta0, omega0, traj);
  const Vec3 k = flight_momentum(*m, init);

  // Classical Runge-Kutta on the quaternion, omega from the momentum at each stage.
  const auto rate = [&](double t, const Quat& th) {
    const CentroidalMap c = compute_centroidal_map(*m, th.normalized(), eval(traj, t));
    return quaternion_rate(th, body_rate(c, k, eval_rate(traj, t))).coeffs();
  };
  const int steps = 400;
  const double dt = traj.t_f / steps;
  Quat th = theta0;
  for (int s = 0; s < steps; ++s) {
    const double t = s * dt;
    const Eigen::Vector4d k1 = rate(t, th);
    const Eigen::Vector4d k2 = rate(t + dt / 2, Quat(Eigen::Vector4d(th.coeffs() + dt / 2 * k1)));
    const Eigen::Vector4d k3 = rate(t + dt / 2, Quat(Eigen::Vector4d(th.coeffs() + dt / 2 * k2)));
    const Eigen::Vector4d k4 = rate(std::min(t + dt, traj.t_f), Quat(Eigen::Vector4d(th.coeffs() + dt * k3)));
    th.coeffs() += dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    th.normalize();
  }
  const FlightOutcome euler = integrate_orientation(*m, init, traj, 10000);
  CHECK(euler.theta_tf.angularDistance(th) < 1e-4);
  const CentroidalMap c = compute_centroidal_map(*m, th, eval(traj, traj.t_f));
  CHECK((euler.omega_tf - body_rate(c, k, eval_rate(traj, traj.t_f))).norm() < 1e-3);
}

TEST_CASE("integrate orientation") {
  SUBCASE("frozen joints and no spin keep the orientation") {
    const auto m = builtin("biped12");
    const Quat theta0(Eigen::AngleAxisd(0.3, Vec3(1, 1, 0).normalized()));
    for (double t_f : {0.1, 0.5, 2.0}) {
      const TrajectoryMatrix traj = hold_trajectory(VecX::Constant(12, 0.1), 3, t_f);
      const FlightOutcome out = integrate_orientation(*m, initial_state(theta0, Vec3::Zero(), traj), traj, 11);
      CHECK(out.theta_tf.angularDistance(theta0) < 1e-14);
    }
  }
  SUBCASE("single body spinning about a principal axis") {
    const RobotModel body = single_body(5.0, Vec3(1, 2, 3).asDiagonal());
    const TrajectoryMatrix traj = hold_trajectory(VecX(), 3, 0.5);
    const FlightOutcome out = integrate_orientation(body, initial_state(Quat::Identity(), Vec3(0, 1, 0), traj), traj, 1000);
    const Eigen::AngleAxisd aa(out.theta_tf);
    CHECK(aa.angle() == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(std::abs(aa.axis().y() - 1.0) < 1e-12);
    CHECK((out.omega_tf - Vec3(0, 1, 0)).norm() < 1e-14);
  }
  SUBCASE("log layout") {
    const auto m = builtin("biped12");
    const TrajectoryMatrix traj = hold_trajectory(VecX::Zero(12), 3, 0.3);
    const FlightOutcome out = integrate_orientation(*m, initial_state(Quat::Identity(), Vec3::Zero(), traj), traj, 11);
    CHECK(out.log.samples.size() == 12);
    CHECK(out.log.samples.front().t == 0.0);
    CHECK(out.log.samples.back().t == 0.3);
  }
  SUBCASE("inputs are checked") {
    const auto m = builtin("biped12");
    const TrajectoryMatrix traj = hold_trajectory(VecX::Zero(12), 3, 0.3);
    FlightInitialState init = initial_state(Quat::Identity(), Vec3::Zero(), traj);
    CHECK_THROWS_AS(integrate_orientation(*m, init, traj, 0), InputError);
    init.q0[0] = 0.5;
    CHECK_THROWS_AS(integrate_orientation(*m, init, traj, 11), InputError);
  }
}

// Explicit Euler at eleven steps loses about one percent of the body rotation,
// which exceeds 1e-3 rad for this swing (about 0.3 rad of pitch).
TEST_CASE("eleven steps are close to the fine-step reference" * doctest::should_fail()) {
  const auto m = builtin("planar3");
  const double t_f = 0.3;
  TrajectoryMatrix traj;
  traj.t_f = t_f;
  traj.gamma = MatX::Zero(2, 4);
  const auto step = [&](int row, double from, double to) {
    const double d = to - from;
    traj.gamma.row(row) << -2 * d / (t_f * t_f * t_f), 3 * d / (t_f * t_f), 0.0, from;
  };
  step(0, 0.3, -0.3);
  step(1, -0.3, 0.0);
  CHECK(std::abs(final_angle(*m, traj, 11) - final_angle(*m, traj, 10000)) < 1e-3);
}

TEST_CASE("flight invariants") {
  const auto m = builtin("biped12");
  std::mt19937_64 rng(5);
  TrajectoryMatrix traj;
  traj.t_f = 0.3;
  traj.gamma = MatX::Zero(12, 4);
  for (int i = 0; i < 12; ++i) traj.gamma.row(i) = random_vec(rng, 4, 3.0).transpose();
  const FlightInitialState init = initial_state(random_quat(rng), random_vec(rng, 3, 0.5), traj);

  SUBCASE("translation invariance is bit-identical") {
    const FlightOutcome plain = integrate_orientation(*m, init, traj, 101);
    IntegrationOptions moving;
    moving.base_velocity = [](double t) { return Vec3(1.0 + t, -3.0 * t * t, 9.81 * (0.15 - t)); };
    const FlightOutcome out = integrate_orientation(*m, init, traj, 101, moving);
    CHECK(out.theta_tf.coeffs() == plain.theta_tf.coeffs());
    CHECK(out.omega_tf == plain.omega_tf);
    CHECK(out.k_Gf == plain.k_Gf);
    for (std::size_t s = 0; s < out.log.samples.size(); ++s) {
      CHECK(out.log.samples[s].theta.coeffs() == plain.log.samples[s].theta.coeffs());
    }
  }
  SUBCASE("momentum recomputed per body is conserved at fine resolution") {
    const FlightOutcome out = integrate_orientation(*m, init, traj, 10000);
    double drift = 0.0;
    for (const auto& s : out.log.samples) drift = std::max(drift, (s.k_G - out.k_Gf).norm());
    CHECK(drift < 1e-6 * (1.0 + out.k_Gf.norm()));
  }
  SUBCASE("quaternions stay normalized") {
    const FlightOutcome out = integrate_orientation(*m, init, traj, 500);
    for (const auto& s : out.log.samples) CHECK(std::abs(s.theta.norm() - 1.0) < 1e-12);
  }
  SUBCASE("first-order self convergence") {
    IntegrationOptions quiet;
    quiet.record_log = false;
    const Quat ref = integrate_orientation(*m, init, traj, 64000, quiet).theta_tf;
    const double e1 = integrate_orientation(*m, init, traj, 200, quiet).theta_tf.angularDistance(ref);
    const double e2 = integrate_orientation(*m, init, traj, 400, quiet).theta_tf.angularDistance(ref);
    const double e3 = integrate_orientation(*m, init, traj, 800, quiet).theta_tf.angularDistance(ref);
    CHECK(std::log2(e1 / e2) == doctest::Approx(1.0).epsilon(0.15));
    CHECK(std::log2(e2 / e3) == doctest::Approx(1.0).epsilon(0.15));
  }
}

TEST_CASE("limb contributions") {
  SUBCASE("at rest") {
    const auto m = builtin("humanoid20");
    const LimbMomenta l = limb_contributions(*m, Quat::Identity(), VecX::Zero(20), Vec3::Zero(), VecX::Zero(20));
    for (const auto& g : l.groups) CHECK(g.isZero(0.0));
    CHECK(l.groups.size() == m->group_names().size());
  }
  SUBCASE("mirrored planar legs share the sagittal momentum equally") {
    const auto m = builtin("planar3");
    const VecX q = VecX::Constant(2, 0.4);
    const VecX qdot = VecX::Constant(2, 1.5);
    const LimbMomenta l = limb_contributions(*m, Quat::Identity(), q, Vec3::Zero(), qdot);
    CHECK(std::abs(l.groups[0].y()) > 1e-3);
    CHECK(l.groups[0].y() == doctest::Approx(l.groups[1].y()).epsilon(1e-12));
  }
  SUBCASE("groups partition the total") {
    std::mt19937_64 rng(7);
    const auto m = builtin("humanoid20");
    for (int trial = 0; trial < 20; ++trial) {
      const LimbMomenta l = limb_contributions(*m, random_quat(rng), random_vec(rng, 20, M_PI),
                                               random_vec(rng, 3, 2.0), random_vec(rng, 20, 2.0));
      Vec3 sum = Vec3::Zero();
      for (const auto& g : l.groups) sum += g;
      CHECK((sum - l.total).norm() < 1e-12);
    }
  }
}

TEST_CASE("flight csv") {
  const auto m = builtin("biped12");
  const TrajectoryMatrix traj = hold_trajectory(VecX::Zero(12), 3, 0.3);
  const FlightOutcome out = integrate_orientation(*m, initial_state(Quat::Identity(), Vec3::Zero(), traj), traj, 11);
  std::ostringstream csv;
  write_flight_csv(csv, out.log);
  std::istringstream in(csv.str());
  std::string header;
  std::getline(in, header);
  const auto columns = std::count(header.begin(), header.end(), ',') + 1;
  CHECK(columns == 11 + 3 * static_cast<long>(m->group_names().size()) + 2 * 12);
  CHECK(header.rfind("t,qw,qx,qy,qz,wx,wy,wz,kx,ky,kz,k_left_leg_x", 0) == 0);
  int rows = 0;
  for (std::string line; std::getline(in, line);) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') + 1 == columns);
  }
  CHECK(rows == 12);
}
