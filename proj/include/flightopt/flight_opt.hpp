#pragma once

// Limb-swing trajectory optimization over the flight phase. The free
// variables are the polynomial coefficients of the significant joints, the
// cost is the touchdown orientation angle and 14 scalar equalities pin the
// feet relative to the CoM at liftoff and touchdown.

#include "flightopt/flight_dyn.hpp"
#include "flightopt/nlp_solver.hpp"
#include "flightopt/poly_traj.hpp"
#include "flightopt/rbd.hpp"

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace flightopt {

inline constexpr int kNumFlightConstraints = 14;

struct FlightProblem {
  RobotModelPtr model;
  double t_f = 0.3;
  Quat theta0 = Quat::Identity();
  Vec3 omega0 = Vec3::Zero();
  Vec3 v_com_liftoff = Vec3::Zero();
  Vec3 p_stance_td_target = Vec3::Zero();  // touchdown foot minus CoM at t_f
  Vec3 p_swing_lo_target = Vec3::Zero();   // liftoff foot minus CoM at 0
  double h_stance = 0.0;
  double h_swing = 0.0;
  int N = 11;  // integration steps; the log has N + 1 samples
  int degree = 3;
  VecX q_hold;  // liftoff posture; empty means all zeros
  bool stance_left = true;  // the touchdown leg
  bool literal_constraint_3 = false;  // subtract p_G(t_f) instead of p_G(0)
  bool normalized_time = true;  // optimize coefficients in s = t / t_f

  /// Throws InputError, including when a target is out of reach.
  void validate() const;
  VecX holds() const;
  int stance_frame() const;
  int swing_frame() const;
};

/// Distance bound used by the reachability check for the limb carrying a
/// foot frame: hip-to-CoM distance at the hold posture plus segment lengths.
double reach_bound(const FlightProblem& problem, int foot_frame);

/// Names of the 14 residuals in canonical order.
const std::array<std::string, kNumFlightConstraints>& constraint_names();

/// Pure evaluation on an explicit trajectory.
double trajectory_cost(const FlightProblem& problem, const TrajectoryMatrix& traj);
VecX trajectory_residuals(const FlightProblem& problem, const TrajectoryMatrix& traj);

/// Cost and residuals as functions of the free variables, memoizing the last
/// evaluations so gradient probes shared between constraints integrate once.
/// Not thread-safe.
class FlightEvaluator {
 public:
  explicit FlightEvaluator(FlightProblem problem);

  const FlightProblem& problem() const { return problem_; }
  const FreeVariableLayout& layout() const { return layout_; }
  VecX hold_point() const;
  TrajectoryMatrix trajectory(const VecX& x) const;

  double cost(const VecX& x) const;
  double residual(int index, const VecX& x) const;
  VecX residuals(const VecX& x) const;
  nlp::ProblemFunctions functions() const;

  long integrations() const { return integrations_; }

  struct Liftoff {
    Vec3 swing_rel = Vec3::Zero();
    Vec3 p_G = Vec3::Zero();
    Vec3 swing_rel_velocity = Vec3::Zero();
    double stance_rel_z = 0.0;
  };
  struct Touchdown {
    double angle = 0.0;
    Vec3 stance_rel = Vec3::Zero();
    Vec3 stance_rel_velocity = Vec3::Zero();
    double swing_rel_z = 0.0;
    Vec3 p_G = Vec3::Zero();
  };
  template <typename T>
  struct Cache {
    struct Entry {
      VecX x;
      T value;
    };
    std::unordered_map<std::uint64_t, Entry> entries;
    std::deque<std::uint64_t> order;  // oldest first
  };

 private:
  const Liftoff& liftoff(const VecX& x) const;
  const Touchdown& touchdown(const VecX& x) const;

  TrajectoryMatrix reduced_trajectory(const VecX& x) const;

  FlightProblem problem_;
  FlightProblem reduced_;  // frozen joints merged away
  FreeVariableLayout layout_;
  VecX holds_;
  VecX column_scale_;  // divides the free variables into seconds-based coefficients
  mutable Cache<Liftoff> liftoff_cache_;
  mutable Cache<Touchdown> touchdown_cache_;
  mutable long integrations_ = 0;
};

/// Uncached conveniences over the free variables.
double flight_cost(const FlightProblem& problem, const VecX& x);
VecX constraint_residuals(const FlightProblem& problem, const VecX& x);

struct PlaybackReport {
  int samples = 0;
  double touchdown_angle = 0.0;       // rad
  Vec3 touchdown_rpy = Vec3::Zero();  // roll, pitch, yaw of theta(t_f)
  Vec3 omega_tf = Vec3::Zero();
  VecX residuals;                     // 14, at playback resolution
  double stance_target_error = 0.0;   // m
  double swing_target_error = 0.0;    // m
  double momentum_drift = 0.0;        // max_t |k_G(t) - k_Gf|
  Vec3 k_Gf = Vec3::Zero();
  std::vector<std::string> group_names;
  std::vector<double> peak_sagittal;  // max_t |k_y| per group
  std::vector<Vec3> peak_momentum;    // componentwise max_t |k| per group
};

struct Playback {
  FlightLog log;
  PlaybackReport report;
};

/// Re-integrates with `n_verify` steps and reports.
Playback playback(const FlightProblem& problem, const TrajectoryMatrix& traj, int n_verify);

struct OptimizeOptions {
  nlp::SolverOptions solver;
  int n_verify = 1001;
  std::optional<VecX> warm_start;  // free variables; default is the hold point
};

struct FlightSolution {
  nlp::SolveResult solve;
  TrajectoryMatrix gamma;
  Playback verification;
  long integrations = 0;
};

FlightSolution optimize_flight(const FlightProblem& problem, const OptimizeOptions& options = {});

/// Touchdown angle of the flight with every joint held at the liftoff posture.
double frozen_limb_angle(const FlightProblem& problem, int steps);

}  // namespace flightopt
