#include "helpers.hpp"

#include "flightopt/flight_dyn.hpp"
#include "flightopt/poly_traj.hpp"

#include <doctest.h>

using namespace flightopt;
using namespace flightopt::testing;

namespace {

Vec3 rpy_of(const Quat& q) {
  const Mat3 R = q.toRotationMatrix();
  return {std::atan2(R(2, 1), R(2, 2)), std::asin(-R(2, 0)), std::atan2(R(1, 0), R(0, 0))};
}

double max_abs(const VecX& v) { return v.cwiseAbs().maxCoeff(); }

// Relative foot position and velocity computed from the public kinematics API.
struct FootState {
  Vec3 position;
  Vec3 velocity;
};

FootState foot_state(const RobotModel& m, const Quat& theta, const VecX& q, const Vec3& omega, const VecX& qdot,
                     const std::string& frame) {
  VecX nu(qdot.size() + 6);
  nu << Vec3::Zero(), omega, qdot;
  const Kinematics kin = forward_kinematics(m, theta, q);
  const CentroidalMap cmap = compute_centroidal_map(m, kin);
  const Vec3 v_G = cmap.A_l * nu / cmap.mass;
  return {frame_position(m, kin, m.frame_index(frame)) - cmap.p_G, point_jacobian(m, theta, q, frame) * nu - v_G};
}

}  // namespace

TEST_CASE("cost of held limbs") {
  SUBCASE("no rotation") {
    const FlightProblem p = running_problem(builtin("biped12"), 0.31);
    const FlightEvaluator e(p);
    CHECK(e.cost(e.hold_point()) == 0.0);
    CHECK(flight_cost(p, e.hold_point()) == 0.0);
  }
  SUBCASE("single body spinning about a principal axis") {
    FlightProblem p;
    p.model = shared(body_with_massless_legs(Vec3(1, 2, 3).asDiagonal()));
    p.t_f = 0.3;
    p.omega0 = Vec3(0, 1, 0);
    p.p_stance_td_target = Vec3(0, 0.1, -0.5);
    p.p_swing_lo_target = Vec3(0, -0.1, -0.5);
    const FlightEvaluator e(p);
    CHECK(e.cost(e.hold_point()) == doctest::Approx(0.3).epsilon(1e-4));
  }
}

TEST_CASE("cost equals the logged touchdown rotation") {
  std::mt19937_64 rng(1);
  const FlightProblem p = running_problem(builtin("biped12"), 0.31);
  const FlightEvaluator e(p);
  const VecX x = e.hold_point() + random_vec(rng, e.layout().dimension(), 0.3);
  const TrajectoryMatrix traj = e.trajectory(x);
  const FlightOutcome out = integrate_orientation(*p.model, initial_state(p.theta0, p.omega0, traj), traj, p.N);
  CHECK(e.cost(x) == doctest::Approx(rotation_angle(out.log.samples.back().theta)).epsilon(1e-12));
  CHECK(trajectory_cost(p, traj) == doctest::Approx(e.cost(x)).epsilon(1e-12));
  CHECK((trajectory_residuals(p, traj) - e.residuals(x)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("cost does not depend on the liftoff CoM velocity") {
  std::mt19937_64 rng(2);
  FlightProblem p = running_problem(builtin("humanoid20"), 0.26);
  const VecX x = FlightEvaluator(p).hold_point() + random_vec(rng, 32, 0.3);
  const double cost = flight_cost(p, x);
  const VecX r = constraint_residuals(p, x);
  p.v_com_liftoff = Vec3(-3.0, 2.0, 0.5);
  CHECK(flight_cost(p, x) == cost);
  const VecX r2 = constraint_residuals(p, x);
  for (int i = 0; i < kNumFlightConstraints; ++i) {
    if (i < 9 || i > 11) CHECK(r2[i] == r[i]);
  }
}

TEST_CASE("residuals of a boundary-value cubic") {
  const auto m = builtin("planar3");
  const double t_f = 0.3;
  const VecX q0 = (VecX(2) << 0.4, -0.3).finished();
  const VecX q1 = (VecX(2) << -0.5, 0.2).finished();
  TrajectoryMatrix traj;
  traj.t_f = t_f;
  traj.gamma = MatX::Zero(2, 4);
  for (int j = 0; j < 2; ++j) {
    const double d = q1[j] - q0[j];
    traj.gamma.row(j) << -2 * d / (t_f * t_f * t_f), 3 * d / (t_f * t_f), 0.0, q0[j];
  }
  FlightProblem p;
  p.model = m;
  p.t_f = t_f;
  p.q_hold = q0;
  const FlightOutcome out = integrate_orientation(*m, initial_state(p.theta0, p.omega0, traj), traj, p.N);
  p.p_stance_td_target = foot_state(*m, out.theta_tf, q1, out.omega_tf, VecX::Zero(2), "left_foot").position;
  const FootState swing = foot_state(*m, p.theta0, q0, p.omega0, VecX::Zero(2), "right_foot");
  p.p_swing_lo_target = swing.position;
  p.v_com_liftoff = -swing.velocity;
  const VecX r = trajectory_residuals(p, traj);
  CHECK(max_abs(r.head(12)) < 1e-10);
}

TEST_CASE("zero trajectory on a symmetric model") {
  const auto m = builtin("planar3");
  FlightProblem p;
  p.model = m;
  p.t_f = 0.3;
  const VecX r = trajectory_residuals(p, hold_trajectory(VecX::Zero(2), 3, 0.3));
  const Vec3 p_G = com_position(*m, Quat::Identity(), VecX::Zero(2));
  CHECK((r.head<3>() - (Vec3(0, 0.1, -0.5) - p_G)).norm() < 1e-15);
  CHECK((r.segment<3>(3) - (Vec3(0, -0.1, -0.5) - p_G)).norm() < 1e-15);
  CHECK(r.segment<6>(6).norm() == 0.0);
}

TEST_CASE("cubic coefficients do not reach the liftoff residuals") {
  std::mt19937_64 rng(3);
  const FlightProblem p = running_problem(builtin("biped12"), 0.31);
  const FlightEvaluator e(p);
  const VecX x = e.hold_point() + random_vec(rng, 24, 0.2);
  const VecX r = e.residuals(x);
  for (int v = 0; v < 24; v += 4) {
    VecX y = x;
    y[v] += 0.1;  // t^3 coefficient of one joint
    const VecX s = e.residuals(y);
    for (int i : {3, 4, 5, 9, 10, 11, 12}) CHECK(s[i] == r[i]);
    CHECK((s.head<3>() - r.head<3>()).norm() > 0.0);
  }
}

TEST_CASE("problem validation") {
  FlightProblem p = running_problem(builtin("biped12"), 0.31);
  p.t_f = 0.0;
  CHECK_THROWS_AS(p.validate(), InputError);
  p = running_problem(builtin("biped12"), 0.31);
  p.p_stance_td_target = Vec3(0.12, 0.1, -2.0);
  CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("unreachable"), InputError);
  p = running_problem(builtin("biped12"), 0.31);
  p.theta0.coeffs() *= 2.0;
  CHECK_THROWS_AS(p.validate(), InputError);
  p = running_problem(builtin("biped12"), 0.31);
  p.q_hold = VecX::Zero(3);
  CHECK_THROWS_AS(p.validate(), InputError);
  CHECK_THROWS_AS(FlightEvaluator{p}, InputError);
}

TEST_CASE("biped running flight") {
  const FlightProblem p = running_problem(builtin("biped12"), 0.31);
  OptimizeOptions options;
  const FlightSolution s = optimize_flight(p, options);
  CHECK(s.solve.feasible);
  CHECK(max_abs(s.solve.constraint_residuals) < 1e-6);
  CHECK(s.verification.report.touchdown_angle < 0.05);
  CHECK(s.verification.report.samples == 1002);
  const auto& h = s.solve.cost_history;
  for (std::size_t i = 1; i < h.size(); ++i) CHECK(h[i] <= h[i - 1]);

  SUBCASE("torso momentum stays below each leg's peak") {
    const auto& r = s.verification.report;
    const auto& names = r.group_names;
    const auto at = [&](const char* g) { return std::find(names.begin(), names.end(), g) - names.begin(); };
    const std::size_t torso = at("torso");
    for (const auto& sample : s.verification.log.samples) {
      CHECK(std::abs(sample.group_momenta[torso].y()) < r.peak_sagittal[at("left_leg")]);
      CHECK(std::abs(sample.group_momenta[torso].y()) < r.peak_sagittal[at("right_leg")]);
    }
  }
  SUBCASE("playback resolution has converged") {
    const double a = playback(p, s.gamma, 1001).report.touchdown_angle;
    const double b = playback(p, s.gamma, 2002).report.touchdown_angle;
    CHECK(std::abs(a - b) < 1e-4);
  }
}

// The optimizer drives the eleven-step angle to zero, so the remaining angle
// at 101 steps is the Euler gap of the optimized swing, several mrad.
TEST_CASE("cost changes little between eleven and 101 steps" * doctest::should_fail()) {
  const FlightProblem p = running_problem(builtin("biped12"), 0.31);
  const FlightSolution s = optimize_flight(p);
  FlightProblem fine = p;
  fine.N = 101;
  CHECK(std::abs(trajectory_cost(fine, s.gamma) - trajectory_cost(p, s.gamma)) < 1e-3);
}

// The touchdown position residual carries the Euler error of the eleven-step
// flight, about 5e-3 m, into the playback.
TEST_CASE("stance position residual holds at playback resolution" * doctest::should_fail()) {
  const FlightProblem p = running_problem(builtin("biped12"), 0.31);
  const FlightSolution s = optimize_flight(p);
  CHECK(max_abs(s.verification.report.residuals.head<3>()) < 10 * nlp::SolverOptions{}.constraint_tol);
}

// The rotation angle is not differentiable at zero, so the projected gradient
// keeps a finite norm as the cost goes to zero.
TEST_CASE("projected gradient vanishes at the optimum" * doctest::should_fail()) {
  const FlightProblem p = running_problem(builtin("biped12"), 0.31);
  const FlightSolution s = optimize_flight(p);
  CHECK(s.solve.projected_gradient_norm < nlp::SolverOptions{}.gradient_tol);
}

TEST_CASE("held limbs put all momentum in the torso group") {
  FlightProblem p = running_problem(builtin("biped12"), 0.31);
  p.theta0 = Quat(Eigen::AngleAxisd(0.1, Vec3::UnitY()));
  const Playback pb = playback(p, hold_trajectory(p.holds(), 3, p.t_f), 200);
  for (const auto& sample : pb.log.samples) {
    for (std::size_t g = 0; g + 1 < sample.group_momenta.size(); ++g) CHECK(sample.group_momenta[g].norm() == 0.0);
  }
  CHECK(pb.report.touchdown_angle == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("tilted liftoff is recovered") {
  FlightProblem p = running_problem(builtin("biped12"), 0.31);
  p.theta0 = Quat(Eigen::AngleAxisd(5.0 * M_PI / 180.0, Vec3::UnitY()));
  const FlightSolution s = optimize_flight(p, {shipped_solver()});
  CHECK(s.solve.feasible);
  CHECK(s.verification.report.touchdown_angle < frozen_limb_angle(p, 1001));
}

TEST_CASE("humanoid with arms converges from the hold posture") {
  const FlightProblem p = running_problem(builtin("humanoid20"), 0.26);
  const FlightEvaluator e(p);
  CHECK(e.layout().dimension() == 32);
  const FlightSolution s = optimize_flight(p, {shipped_solver()});
  CHECK(s.solve.feasible);
  CHECK(max_abs(s.solve.constraint_residuals) < 1e-6);
  CHECK(s.verification.report.touchdown_angle < 0.05);
}

TEST_CASE("mirrored problems give mirrored solutions") {
  const auto m = builtin("biped12");
  const FlightProblem a = running_problem(m, 0.31);
  FlightProblem b = a;
  b.stance_left = false;
  b.p_stance_td_target.y() *= -1;
  b.p_swing_lo_target.y() *= -1;
  b.v_com_liftoff.y() *= -1;
  const auto mirror_joint = [&](int j) {
    const std::string& name = m->joint_names()[j];
    const bool left = name.rfind("left_", 0) == 0;
    const std::string other = (left ? "right_" : "left_") + name.substr(left ? 5 : 6);
    const bool flips = name.find("roll") != std::string::npos || name.find("yaw") != std::string::npos;
    return std::pair{m->joint_index(other), flips ? -1.0 : 1.0};
  };
  for (int j = 0; j < 12; ++j) {
    const auto [k, sign] = mirror_joint(j);
    b.q_hold[k] = sign * a.q_hold[j];
  }
  nlp::SolverOptions options;
  options.max_outer_iterations = 20;
  const FlightSolution sa = optimize_flight(a, {options});
  const FlightSolution sb = optimize_flight(b, {options});
  for (int j = 0; j < 12; ++j) {
    const auto [k, sign] = mirror_joint(j);
    CHECK((sa.gamma.gamma.row(j) - sign * sb.gamma.gamma.row(k)).cwiseAbs().maxCoeff() < 1e-5);
  }
  const Vec3 ra = rpy_of(sa.verification.log.samples.back().theta);
  const Vec3 rb = rpy_of(sb.verification.log.samples.back().theta);
  CHECK(std::abs(ra.x() + rb.x()) < 1e-6);
  CHECK(std::abs(ra.y() - rb.y()) < 1e-6);
  CHECK(std::abs(ra.z() + rb.z()) < 1e-6);
}

TEST_CASE("warm start") {
  const FlightProblem p = running_problem(builtin("biped12"), 0.31);
  OptimizeOptions options;
  options.solver = shipped_solver();
  const FlightSolution first = optimize_flight(p, options);
  options.warm_start = first.solve.x_star;
  const FlightSolution again = optimize_flight(p, options);
  CHECK(again.solve.cost_star <= first.solve.cost_star);
  options.warm_start = VecX::Zero(3);
  CHECK_THROWS_AS(optimize_flight(p, options), InputError);
}

TEST_CASE("literal liftoff reading changes only the swing position residuals") {
  std::mt19937_64 rng(4);
  FlightProblem p = running_problem(builtin("biped12"), 0.31);
  const VecX x = FlightEvaluator(p).hold_point() + random_vec(rng, 24, 0.2);
  const VecX r = constraint_residuals(p, x);
  p.literal_constraint_3 = true;
  const VecX s = constraint_residuals(p, x);
  for (int i = 0; i < kNumFlightConstraints; ++i) {
    if (i < 3 || i > 5) CHECK(s[i] == r[i]);
  }
  CHECK((s.segment<3>(3) - r.segment<3>(3)).norm() > 0.0);
}
