#pragma once

#include "flightopt/flight_opt.hpp"
#include "flightopt/model_io.hpp"
#include "flightopt/rbd.hpp"

#include <memory>
#include <random>

namespace flightopt::testing {

inline RobotModelPtr shared(RobotModel model) { return std::make_shared<const RobotModel>(std::move(model)); }

inline RobotModelPtr builtin(const char* id) { return shared(builtin_model(id)); }

/// One rigid body, inertia about its CoM given by `inertia`.
inline RobotModel single_body(double mass, const Mat3& inertia, const Vec3& com = Vec3::Zero()) {
  ModelDescription d;
  d.name = "single";
  d.links.push_back({"body", {mass, com, inertia}});
  return RobotModel(d);
}

/// A body with two massless single-hinge legs, so its dynamics are the body's
/// alone but it still carries feet and significant joints.
inline RobotModel body_with_massless_legs(const Mat3& inertia) {
  ModelDescription d;
  d.name = "body_legs";
  d.links.push_back({"body", {5.0, Vec3::Zero(), inertia}});
  for (const auto& [side, y] : {std::pair{"left", 0.1}, std::pair{"right", -0.1}}) {
    const std::string s = side;
    d.links.push_back({s + "_leg", {0.0, Vec3::Zero(), Mat3::Zero()}});
    JointSpec j;
    j.name = s + "_hip";
    j.axis = Vec3::UnitY();
    j.origin_xyz = Vec3(0, y, 0);
    j.parent = "body";
    j.child = s + "_leg";
    d.joints.push_back(j);
    d.frames.push_back({s + "_foot", s + "_leg", Vec3(0, 0, -0.5)});
    d.limbs.push_back({s + "_leg", s + "_hip"});
  }
  d.left_foot = "left_foot";
  d.right_foot = "right_foot";
  return RobotModel(d);
}

inline Quat random_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Quat q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q;
}

inline VecX random_vec(std::mt19937_64& rng, int size, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  VecX v(size);
  for (int i = 0; i < size; ++i) v[i] = u(rng);
  return v;
}

/// Running scenario used throughout: 1 m/s forward, left foot lands ahead.
inline FlightProblem running_problem(RobotModelPtr model, double t_f) {
  FlightProblem p;
  p.model = std::move(model);
  p.t_f = t_f;
  p.v_com_liftoff = Vec3(1.0, 0.0, 9.81 * t_f / 2.0);
  p.p_stance_td_target = Vec3(0.12, 0.1, -0.72);
  p.p_swing_lo_target = Vec3(-0.12, -0.1, -0.72);
  p.h_stance = 0.05;
  p.h_swing = 0.05;
  p.q_hold = VecX::Zero(p.model->num_joints());
  p.q_hold[p.model->joint_index("left_hip_pitch")] = -0.3;
  p.q_hold[p.model->joint_index("left_knee")] = 0.5;
  p.q_hold[p.model->joint_index("right_hip_pitch")] = 0.3;
  p.q_hold[p.model->joint_index("right_knee")] = 0.5;
  return p;
}

inline nlp::SolverOptions shipped_solver() {
  nlp::SolverOptions s;
  s.cost_change_tol = 6e-3;
  s.pass_start_gradients = true;
  s.shared_cost_gradient = true;
  return s;
}

}  // namespace flightopt::testing
