#pragma once

// Polynomial joint trajectories over the flight interval. Row i of the
// coefficient matrix holds joint i's coefficients ordered [t^m ... t 1], with
// t in seconds.

#include "flightopt/rbd.hpp"

#include <utility>
#include <vector>

namespace flightopt {

struct TrajectoryMatrix {
  MatX gamma;        // n x (m+1)
  double t_f = 0.0;  // horizon [s]

  int degree() const { return static_cast<int>(gamma.cols()) - 1; }
  int num_joints() const { return static_cast<int>(gamma.rows()); }
};

/// Every joint held at `holds` for the whole horizon.
TrajectoryMatrix hold_trajectory(const VecX& holds, int degree, double t_f);

/// q^d(t). Throws InputError for t outside [0, t_f].
VecX eval(const TrajectoryMatrix& traj, double t);
/// qdot^d(t).
VecX eval_rate(const TrajectoryMatrix& traj, double t);
/// Same, writing into `out`.
void eval(const TrajectoryMatrix& traj, double t, VecX& out);
void eval_rate(const TrajectoryMatrix& traj, double t, VecX& out);

/// Which coefficients the optimizer sees: all coefficients of the
/// significant joints. With `normalized_time` the exposed variables are the
/// coefficients in s = t / t_f; pack/unpack convert to and from seconds.
struct FreeVariableLayout {
  std::vector<int> joints;  // significant joint indices, ascending
  int degree = 3;
  int num_joints = 0;
  double t_f = 1.0;
  bool normalized_time = false;

  int dimension() const { return static_cast<int>(joints.size()) * (degree + 1); }
  /// (joint, column) of each free variable, row-major over `joints`.
  std::vector<std::pair<int, int>> entries() const;
};

FreeVariableLayout make_layout(const RobotModel& model, int degree, double t_f,
                               bool normalized_time = false);

VecX pack(const TrajectoryMatrix& traj, const FreeVariableLayout& layout);
TrajectoryMatrix unpack(const VecX& x, const FreeVariableLayout& layout, const VecX& frozen_holds);

}  // namespace flightopt
