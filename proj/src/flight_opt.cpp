#include "flightopt/flight_opt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>

namespace flightopt {

namespace {

constexpr std::size_t kCacheSize = 128;
constexpr double kReachMargin = 0.98;

using Liftoff = FlightEvaluator::Liftoff;
using Touchdown = FlightEvaluator::Touchdown;

void require_finite(const Vec3& v, const char* name) {
  if (!v.allFinite()) throw InputError(std::string(name) + " must be finite");
}

VecX base_relative_nu(const Vec3& omega, const VecX& qdot) {
  VecX nu(qdot.size() + 6);
  nu << Vec3::Zero(), omega, qdot;
  return nu;
}

// Foot position and velocity relative to the CoM; the base translational
// velocity cancels, so it is left at zero.
struct FootRelative {
  Vec3 position;
  Vec3 velocity;
};

struct Relative {
  const RobotModel& model;
  const Kinematics& kin;
  BodyVelocities vel;
  Vec3 p_G;
  Vec3 v_G = Vec3::Zero();

  Relative(const RobotModel& m, const Kinematics& k, const VecX& nu)
      : model(m), kin(k), vel(body_velocities(m, k, nu)), p_G(com_position(m, k)) {
    for (int i = 0; i < m.num_bodies(); ++i) v_G += m.bodies()[i].inertia.mass * vel.com_linear[i];
    v_G /= m.total_mass();
  }

  FootRelative foot(int frame) const {
    const int b = model.frames()[frame].body;
    const Vec3 p = frame_position(model, kin, frame);
    const Vec3 v = vel.com_linear[b] + vel.angular[b].cross(p - kin.com[b]);
    return {p - p_G, v - v_G};
  }
};

Liftoff compute_liftoff(const FlightProblem& problem, const TrajectoryMatrix& traj) {
  const RobotModel& model = *problem.model;
  const Kinematics kin = forward_kinematics(model, problem.theta0, eval(traj, 0.0));
  const Relative rel(model, kin, base_relative_nu(problem.omega0, eval_rate(traj, 0.0)));
  const FootRelative swing = rel.foot(problem.swing_frame());
  Liftoff out;
  out.swing_rel = swing.position;
  out.swing_rel_velocity = swing.velocity;
  out.p_G = rel.p_G;
  out.stance_rel_z = frame_position(model, kin, problem.stance_frame()).z() - rel.p_G.z();
  return out;
}

Touchdown touchdown_from(const FlightProblem& problem, const TrajectoryMatrix& traj,
                         const FlightOutcome& flight) {
  const RobotModel& model = *problem.model;
  const Kinematics kin = forward_kinematics(model, flight.theta_tf, eval(traj, traj.t_f));
  const Relative rel(model, kin, base_relative_nu(flight.omega_tf, eval_rate(traj, traj.t_f)));
  const FootRelative stance = rel.foot(problem.stance_frame());
  Touchdown out;
  out.angle = rotation_angle(flight.theta_tf);
  out.stance_rel = stance.position;
  out.stance_rel_velocity = stance.velocity;
  out.swing_rel_z = frame_position(model, kin, problem.swing_frame()).z() - rel.p_G.z();
  out.p_G = rel.p_G;
  return out;
}

FlightOutcome fly(const FlightProblem& problem, const TrajectoryMatrix& traj, int steps, bool log) {
  IntegrationOptions opts;
  opts.record_log = log;
  return integrate_orientation(*problem.model, initial_state(problem.theta0, problem.omega0, traj), traj,
                               steps, opts);
}

double residual_of(const FlightProblem& problem, int index, const Liftoff* lo, const Touchdown* td) {
  switch (index) {
    case 0: case 1: case 2:
      return td->stance_rel[index] - problem.p_stance_td_target[index];
    case 3: case 4: case 5: {
      const int k = index - 3;
      const double rel = problem.literal_constraint_3 ? lo->swing_rel[k] + lo->p_G[k] - td->p_G[k]
                                                      : lo->swing_rel[k];
      return rel - problem.p_swing_lo_target[k];
    }
    case 6: case 7: case 8:
      return td->stance_rel_velocity[index - 6];
    case 9: case 10: case 11:
      return lo->swing_rel_velocity[index - 9] + problem.v_com_liftoff[index - 9];
    case 12:
      return lo->stance_rel_z - (problem.p_swing_lo_target.z() + problem.h_stance);
    case 13:
      return td->swing_rel_z - (problem.p_stance_td_target.z() + problem.h_swing);
    default:
      throw InputError("constraint index " + std::to_string(index) + " out of range");
  }
}

bool needs_touchdown(const FlightProblem& problem, int index) {
  if (index >= 3 && index <= 5) return problem.literal_constraint_3;
  return index <= 2 || (index >= 6 && index <= 8) || index == 13;
}

bool needs_liftoff(int index) { return (index >= 3 && index <= 5) || (index >= 9 && index <= 12); }

VecX all_residuals(const FlightProblem& problem, const Liftoff& lo, const Touchdown& td) {
  VecX r(kNumFlightConstraints);
  for (int i = 0; i < kNumFlightConstraints; ++i) r[i] = residual_of(problem, i, &lo, &td);
  return r;
}

std::uint64_t hash_of(const VecX& x) {
  std::uint64_t h = 1469598103934665603ull;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    std::uint64_t w;
    std::memcpy(&w, x.data() + i, sizeof w);
    h = (h ^ w) * 1099511628211ull;
    h ^= h >> 32;
  }
  return h;
}

template <typename T, typename F>
const T& memo(FlightEvaluator::Cache<T>& cache, const VecX& x, F compute) {
  const std::uint64_t h = hash_of(x);
  auto it = cache.entries.find(h);
  if (it != cache.entries.end()) {
    auto& entry = it->second;
    if (entry.x.size() != x.size() || !std::equal(x.data(), x.data() + x.size(), entry.x.data())) {
      entry = {x, compute()};
    }
    return entry.value;
  }
  if (cache.order.size() >= kCacheSize) {
    cache.entries.erase(cache.order.front());
    cache.order.pop_front();
  }
  cache.order.push_back(h);
  return cache.entries.emplace(h, typename FlightEvaluator::Cache<T>::Entry{x, compute()}).first->second.value;
}

Vec3 roll_pitch_yaw(const Quat& q) {
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  const double roll = std::atan2(2.0 * (w * x + y * z), 1.0 - 2.0 * (x * x + y * y));
  const double pitch = std::asin(std::clamp(2.0 * (w * y - z * x), -1.0, 1.0));
  const double yaw = std::atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z));
  return {roll, pitch, yaw};
}

}  // namespace

VecX FlightProblem::holds() const {
  if (!model) throw InputError("flight problem has no model");
  if (q_hold.size() == 0) return VecX::Zero(model->num_joints());
  return q_hold;
}

int FlightProblem::stance_frame() const { return stance_left ? model->left_foot() : model->right_foot(); }
int FlightProblem::swing_frame() const { return stance_left ? model->right_foot() : model->left_foot(); }

double reach_bound(const FlightProblem& problem, int foot_frame) {
  const RobotModel& model = *problem.model;
  const auto& bodies = model.bodies();
  const auto& frame = model.frames()[foot_frame];
  const int limb = bodies[frame.body].limb;
  const Kinematics kin = forward_kinematics(model, Quat::Identity(), problem.holds());
  const Vec3 p_G = com_position(model, kin);

  double length = frame.offset.norm();
  int b = frame.body;
  if (limb < 0) return (frame_position(model, kin, foot_frame) - p_G).norm();
  while (bodies[b].parent >= 0 && bodies[bodies[b].parent].limb == limb) {
    length += bodies[b].origin_translation.norm();
    b = bodies[b].parent;
  }
  return (kin.position[b] - p_G).norm() + length;
}

void FlightProblem::validate() const {
  if (!model) throw InputError("flight problem has no model");
  if (!(t_f > 0.0) || !std::isfinite(t_f)) throw InputError("t_f must be positive");
  if (!theta0.coeffs().allFinite() || std::abs(theta0.norm() - 1.0) > 1e-6) {
    throw InputError("theta0 must be a unit quaternion");
  }
  require_finite(omega0, "omega0");
  require_finite(v_com_liftoff, "v_com_liftoff");
  require_finite(p_stance_td_target, "p_stance_td_target");
  require_finite(p_swing_lo_target, "p_swing_lo_target");
  if (!(h_stance >= 0.0) || !std::isfinite(h_stance)) throw InputError("h_stance must be non-negative");
  if (!(h_swing >= 0.0) || !std::isfinite(h_swing)) throw InputError("h_swing must be non-negative");
  if (N < 2) throw InputError("N must be at least 2");
  if (degree < 1) throw InputError("degree must be at least 1");
  if (q_hold.size() != 0) {
    if (q_hold.size() != model->num_joints()) {
      throw InputError("q_hold has " + std::to_string(q_hold.size()) + " entries, model has " +
                       std::to_string(model->num_joints()) + " joints");
    }
    if (!q_hold.allFinite()) throw InputError("q_hold must be finite");
  }
  if (model->description().left_foot.empty() || model->description().right_foot.empty()) {
    throw InputError("model does not name both feet");
  }
  if (std::none_of(model->joint_significance().begin(), model->joint_significance().end(),
                   [](Significance s) { return s == Significance::Significant; })) {
    throw InputError("model has no significant joints to optimize");
  }
  const auto check_reach = [&](const Vec3& target, int frame, const char* name) {
    const double bound = reach_bound(*this, frame);
    if (target.norm() > kReachMargin * bound) {
      throw InputError(std::string(name) + " is unreachable: |target| = " + std::to_string(target.norm()) +
                       " m exceeds " + std::to_string(kReachMargin * bound) + " m");
    }
  };
  check_reach(p_stance_td_target, stance_frame(), "p_stance_td_target");
  check_reach(p_swing_lo_target, swing_frame(), "p_swing_lo_target");
}

const std::array<std::string, kNumFlightConstraints>& constraint_names() {
  static const std::array<std::string, kNumFlightConstraints> names = {
      "stance_td_position_x", "stance_td_position_y", "stance_td_position_z",
      "swing_lo_position_x",  "swing_lo_position_y",  "swing_lo_position_z",
      "stance_td_velocity_x", "stance_td_velocity_y", "stance_td_velocity_z",
      "swing_lo_velocity_x",  "swing_lo_velocity_y",  "swing_lo_velocity_z",
      "stance_lo_clearance",  "swing_td_clearance"};
  return names;
}

double trajectory_cost(const FlightProblem& problem, const TrajectoryMatrix& traj) {
  return rotation_angle(fly(problem, traj, problem.N, false).theta_tf);
}

VecX trajectory_residuals(const FlightProblem& problem, const TrajectoryMatrix& traj) {
  const Liftoff lo = compute_liftoff(problem, traj);
  const Touchdown td = touchdown_from(problem, traj, fly(problem, traj, problem.N, false));
  return all_residuals(problem, lo, td);
}

FlightEvaluator::FlightEvaluator(FlightProblem problem) : problem_(std::move(problem)) {
  problem_.validate();
  holds_ = problem_.holds();
  layout_ = make_layout(*problem_.model, problem_.degree, problem_.t_f, problem_.normalized_time);
  reduced_ = problem_;
  reduced_.model = std::make_shared<const RobotModel>(reduced_model(*problem_.model, holds_));
  reduced_.q_hold = holds_(layout_.joints);
  const int cols = problem_.degree + 1;
  column_scale_.resize(cols);
  for (int c = 0; c < cols; ++c) {
    column_scale_[c] = layout_.normalized_time ? std::pow(problem_.t_f, problem_.degree - c) : 1.0;
  }
}

TrajectoryMatrix FlightEvaluator::reduced_trajectory(const VecX& x) const {
  if (x.size() != layout_.dimension()) {
    throw InputError("variable vector has " + std::to_string(x.size()) + " entries, layout needs " +
                     std::to_string(layout_.dimension()));
  }
  const int rows = static_cast<int>(layout_.joints.size());
  const int cols = problem_.degree + 1;
  TrajectoryMatrix out;
  out.t_f = problem_.t_f;
  out.gamma.resize(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) out.gamma(r, c) = x[r * cols + c] / column_scale_[c];
  }
  return out;
}

VecX FlightEvaluator::hold_point() const {
  return pack(hold_trajectory(holds_, problem_.degree, problem_.t_f), layout_);
}

TrajectoryMatrix FlightEvaluator::trajectory(const VecX& x) const { return unpack(x, layout_, holds_); }

const Liftoff& FlightEvaluator::liftoff(const VecX& x) const {
  // Only the constant and linear coefficients reach t = 0.
  const int cols = problem_.degree + 1;
  const int rows = static_cast<int>(layout_.joints.size());
  if (x.size() != layout_.dimension()) reduced_trajectory(x);
  VecX key(2 * rows);
  for (int r = 0; r < rows; ++r) {
    key[2 * r] = x[r * cols + cols - 1];
    key[2 * r + 1] = cols > 1 ? x[r * cols + cols - 2] : 0.0;
  }
  return memo(liftoff_cache_, key, [&] { return compute_liftoff(reduced_, reduced_trajectory(x)); });
}

const Touchdown& FlightEvaluator::touchdown(const VecX& x) const {
  return memo(touchdown_cache_, x, [&] {
    ++integrations_;
    const TrajectoryMatrix traj = reduced_trajectory(x);
    return touchdown_from(reduced_, traj, fly(reduced_, traj, reduced_.N, false));
  });
}

double FlightEvaluator::cost(const VecX& x) const { return touchdown(x).angle; }

double FlightEvaluator::residual(int index, const VecX& x) const {
  const Liftoff* lo = needs_liftoff(index) ? &liftoff(x) : nullptr;
  const Touchdown* td = needs_touchdown(problem_, index) ? &touchdown(x) : nullptr;
  return residual_of(problem_, index, lo, td);
}

VecX FlightEvaluator::residuals(const VecX& x) const {
  const Liftoff lo = liftoff(x);
  return all_residuals(problem_, lo, touchdown(x));
}

nlp::ProblemFunctions FlightEvaluator::functions() const {
  nlp::ProblemFunctions f;
  f.cost = [this](const VecX& x) { return cost(x); };
  for (int i = 0; i < kNumFlightConstraints; ++i) {
    f.constraints.push_back([this, i](const VecX& x) { return residual(i, x); });
  }
  return f;
}

double flight_cost(const FlightProblem& problem, const VecX& x) { return FlightEvaluator(problem).cost(x); }

VecX constraint_residuals(const FlightProblem& problem, const VecX& x) {
  return FlightEvaluator(problem).residuals(x);
}

Playback playback(const FlightProblem& problem, const TrajectoryMatrix& traj, int n_verify) {
  problem.validate();
  if (n_verify < 1) throw InputError("playback needs at least one step");
  if (traj.num_joints() != problem.model->num_joints()) {
    throw InputError("trajectory has " + std::to_string(traj.num_joints()) + " joints, model has " +
                     std::to_string(problem.model->num_joints()));
  }
  if (std::abs(traj.t_f - problem.t_f) > 1e-12 * std::max(1.0, problem.t_f)) {
    throw InputError("trajectory horizon " + std::to_string(traj.t_f) + " s does not match t_f " +
                     std::to_string(problem.t_f) + " s");
  }

  Playback out;
  FlightOutcome flight = fly(problem, traj, n_verify, true);
  const Liftoff lo = compute_liftoff(problem, traj);
  const Touchdown td = touchdown_from(problem, traj, flight);

  PlaybackReport& r = out.report;
  r.samples = static_cast<int>(flight.log.samples.size());
  r.touchdown_angle = td.angle;
  r.touchdown_rpy = roll_pitch_yaw(flight.theta_tf);
  r.omega_tf = flight.omega_tf;
  r.residuals = all_residuals(problem, lo, td);
  r.stance_target_error = r.residuals.segment<3>(0).norm();
  r.swing_target_error = r.residuals.segment<3>(3).norm();
  r.k_Gf = flight.k_Gf;
  r.group_names = flight.log.group_names;
  r.peak_sagittal.assign(r.group_names.size(), 0.0);
  r.peak_momentum.assign(r.group_names.size(), Vec3::Zero());
  for (const auto& s : flight.log.samples) {
    r.momentum_drift = std::max(r.momentum_drift, (s.k_G - flight.k_Gf).norm());
    for (std::size_t g = 0; g < s.group_momenta.size(); ++g) {
      r.peak_sagittal[g] = std::max(r.peak_sagittal[g], std::abs(s.group_momenta[g].y()));
      r.peak_momentum[g] = r.peak_momentum[g].cwiseMax(s.group_momenta[g].cwiseAbs());
    }
  }
  out.log = std::move(flight.log);
  return out;
}

FlightSolution optimize_flight(const FlightProblem& problem, const OptimizeOptions& options) {
  const FlightEvaluator evaluator(problem);
  VecX x0 = evaluator.hold_point();
  if (options.warm_start) {
    if (options.warm_start->size() != x0.size()) {
      throw InputError("warm start has " + std::to_string(options.warm_start->size()) +
                       " entries, problem has " + std::to_string(x0.size()));
    }
    x0 = *options.warm_start;
  }
  FlightSolution out;
  out.solve = nlp::solve(evaluator.functions(), x0, options.solver);
  out.gamma = evaluator.trajectory(out.solve.x_star);
  out.integrations = evaluator.integrations();
  out.verification = playback(evaluator.problem(), out.gamma, options.n_verify);
  return out;
}

double frozen_limb_angle(const FlightProblem& problem, int steps) {
  problem.validate();
  const TrajectoryMatrix traj = hold_trajectory(problem.holds(), problem.degree, problem.t_f);
  return rotation_angle(fly(problem, traj, steps, false).theta_tf);
}

}  // namespace flightopt
