#include "flightopt/poly_traj.hpp"

#include <cmath>
#include <string>

namespace flightopt {

namespace {

void check_time(const TrajectoryMatrix& traj, double t) {
  const double slack = 1e-12 * std::max(1.0, traj.t_f);
  if (!(t >= -slack && t <= traj.t_f + slack)) {
    throw InputError("time " + std::to_string(t) + " outside trajectory horizon [0, " +
                     std::to_string(traj.t_f) + "]");
  }
}

void check_layout(const FreeVariableLayout& layout) {
  if (layout.degree < 0) throw InputError("polynomial degree must be non-negative");
  if (!(layout.t_f > 0.0)) throw InputError("trajectory horizon must be positive");
}

}  // namespace

TrajectoryMatrix hold_trajectory(const VecX& holds, int degree, double t_f) {
  if (degree < 0) throw InputError("polynomial degree must be non-negative");
  if (!(t_f > 0.0)) throw InputError("trajectory horizon must be positive");
  TrajectoryMatrix traj;
  traj.gamma = MatX::Zero(holds.size(), degree + 1);
  traj.gamma.col(degree) = holds;
  traj.t_f = t_f;
  return traj;
}

VecX eval(const TrajectoryMatrix& traj, double t) {
  VecX q;
  eval(traj, t, q);
  return q;
}

VecX eval_rate(const TrajectoryMatrix& traj, double t) {
  VecX qd;
  eval_rate(traj, t, qd);
  return qd;
}

void eval(const TrajectoryMatrix& traj, double t, VecX& out) {
  check_time(traj, t);
  const Eigen::Index rows = traj.gamma.rows();
  const Eigen::Index cols = traj.gamma.cols();
  out.resize(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (Eigen::Index c = 0; c < cols; ++c) acc = acc * t + traj.gamma(r, c);
    out[r] = acc;
  }
}

void eval_rate(const TrajectoryMatrix& traj, double t, VecX& out) {
  check_time(traj, t);
  const int m = traj.degree();
  const Eigen::Index rows = traj.gamma.rows();
  out.resize(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (int c = 0; c < m; ++c) acc = acc * t + static_cast<double>(m - c) * traj.gamma(r, c);
    out[r] = acc;
  }
}

std::vector<std::pair<int, int>> FreeVariableLayout::entries() const {
  std::vector<std::pair<int, int>> out;
  out.reserve(dimension());
  for (int j : joints) {
    for (int c = 0; c <= degree; ++c) out.emplace_back(j, c);
  }
  return out;
}

FreeVariableLayout make_layout(const RobotModel& model, int degree, double t_f, bool normalized_time) {
  FreeVariableLayout layout;
  layout.degree = degree;
  layout.num_joints = model.num_joints();
  layout.t_f = t_f;
  layout.normalized_time = normalized_time;
  check_layout(layout);
  for (int j = 0; j < model.num_joints(); ++j) {
    if (model.joint_significance()[j] == Significance::Significant) layout.joints.push_back(j);
  }
  return layout;
}

VecX pack(const TrajectoryMatrix& traj, const FreeVariableLayout& layout) {
  check_layout(layout);
  if (traj.num_joints() != layout.num_joints || traj.degree() != layout.degree) {
    throw InputError("trajectory shape does not match the variable layout");
  }
  VecX x(layout.dimension());
  int k = 0;
  for (const auto& [joint, col] : layout.entries()) {
    const int power = layout.degree - col;
    const double scale = layout.normalized_time ? std::pow(layout.t_f, power) : 1.0;
    x[k++] = traj.gamma(joint, col) * scale;
  }
  return x;
}

TrajectoryMatrix unpack(const VecX& x, const FreeVariableLayout& layout, const VecX& frozen_holds) {
  check_layout(layout);
  if (x.size() != layout.dimension()) {
    throw InputError("variable vector has " + std::to_string(x.size()) + " entries, layout needs " +
                     std::to_string(layout.dimension()));
  }
  if (frozen_holds.size() != layout.num_joints) {
    throw InputError("hold vector does not match the number of joints");
  }
  TrajectoryMatrix traj = hold_trajectory(frozen_holds, layout.degree, layout.t_f);
  int k = 0;
  for (const auto& [joint, col] : layout.entries()) {
    const int power = layout.degree - col;
    const double scale = layout.normalized_time ? std::pow(layout.t_f, power) : 1.0;
    traj.gamma(joint, col) = x[k++] / scale;
  }
  return traj;
}

}  // namespace flightopt
