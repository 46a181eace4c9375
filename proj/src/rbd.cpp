#include "flightopt/rbd.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <set>

namespace flightopt {

namespace {

std::string quoted(std::string_view s) {
  std::string out = "'";
  out += s;
  out += "'";
  return out;
}

bool finite(const Vec3& v) { return v.allFinite(); }

void check_orientation(const Quat& q) {
  const double norm = q.coeffs().norm();
  if (!std::isfinite(norm) || std::abs(norm - 1.0) > 1e-6) {
    throw InputError("base orientation must be a unit quaternion (norm " + std::to_string(norm) +
                     ")");
  }
}

Mat3 world_inertia(const Mat3& rotation, const Mat3& inertia) {
  return rotation * inertia * rotation.transpose();
}

// Inertia of a point mass at offset d about the reference point.
Mat3 point_inertia(double mass, const Vec3& d) {
  return mass * (d.squaredNorm() * Mat3::Identity() - d * d.transpose());
}

}  // namespace

Mat3 rpy_to_matrix(const Vec3& rpy) {
  return (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) * Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
          Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
      .toRotationMatrix();
}

void SpatialInertia::validate(std::string_view owner) const {
  const std::string who = "link " + quoted(owner);
  if (!std::isfinite(mass) || mass < 0.0) {
    throw InputError("non-physical inertia: " + who + " has mass " + std::to_string(mass));
  }
  if (!com_offset.allFinite() || !inertia_about_com.allFinite()) {
    throw InputError("non-physical inertia: " + who + " has non-finite entries");
  }
  const double scale = std::max(1.0, inertia_about_com.cwiseAbs().maxCoeff());
  if ((inertia_about_com - inertia_about_com.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw InputError("non-physical inertia: " + who + " has an asymmetric inertia tensor");
  }
  const Mat3 sym = 0.5 * (inertia_about_com + inertia_about_com.transpose());
  const Eigen::SelfAdjointEigenSolver<Mat3> eig(sym, Eigen::EigenvaluesOnly);
  const Vec3 moments = eig.eigenvalues();
  const double tol = 1e-12 * scale;
  if (moments.minCoeff() < -tol) {
    throw InputError("non-physical inertia: " + who + " is not positive semidefinite");
  }
  const double total = moments.sum();
  for (int i = 0; i < 3; ++i) {
    if (moments[i] > total - moments[i] + tol) {
      throw InputError("non-physical inertia: " + who +
                       " violates the triangle inequality on principal moments");
    }
  }
}

RobotModel::RobotModel(ModelDescription description) : description_(std::move(description)) {
  const auto& links = description_.links;
  const auto& joints = description_.joints;
  if (links.empty()) throw InputError("model has no links");

  std::map<std::string, int, std::less<>> link_ids;
  for (int i = 0; i < static_cast<int>(links.size()); ++i) {
    if (links[i].name.empty()) throw InputError("link with empty name");
    if (!link_ids.emplace(links[i].name, i).second) {
      throw InputError("duplicate link name " + quoted(links[i].name));
    }
    links[i].inertia.validate(links[i].name);
  }

  std::set<std::string, std::less<>> joint_names;
  std::vector<int> parent_joint(links.size(), -1);
  std::vector<std::vector<int>> child_joints(links.size());
  for (int j = 0; j < static_cast<int>(joints.size()); ++j) {
    const JointSpec& js = joints[j];
    if (js.name.empty()) throw InputError("joint with empty name");
    if (!joint_names.insert(js.name).second) {
      throw InputError("duplicate joint name " + quoted(js.name));
    }
    auto parent = link_ids.find(js.parent);
    auto child = link_ids.find(js.child);
    if (parent == link_ids.end()) {
      throw InputError("joint " + quoted(js.name) + " references unknown parent link " +
                       quoted(js.parent));
    }
    if (child == link_ids.end()) {
      throw InputError("joint " + quoted(js.name) + " references unknown child link " +
                       quoted(js.child));
    }
    if (parent_joint[child->second] != -1) {
      throw InputError("link " + quoted(js.child) + " has more than one parent joint");
    }
    if (!finite(js.origin_xyz) || !finite(js.origin_rpy) || !finite(js.axis) ||
        (js.origin_rotation && !js.origin_rotation->allFinite())) {
      throw InputError("joint " + quoted(js.name) + " has non-finite origin or axis");
    }
    if (js.kind == JointKind::Revolute && js.axis.norm() < 1e-12) {
      throw InputError("joint " + quoted(js.name) + " has a zero axis");
    }
    parent_joint[child->second] = j;
    child_joints[parent->second].push_back(j);
  }

  int root = -1;
  for (int i = 0; i < static_cast<int>(links.size()); ++i) {
    if (parent_joint[i] == -1) {
      if (root != -1) {
        throw InputError("model has more than one root link (" + quoted(links[root].name) +
                         ", " + quoted(links[i].name) + ")");
      }
      root = i;
    }
  }
  if (root == -1) throw InputError("model has no root link (kinematic cycle)");

  // Breadth-first layout so that every parent precedes its children.
  std::vector<int> body_of_link(links.size(), -1);
  std::deque<int> queue{root};
  std::map<int, int> q_of_joint;
  int next_q = 0;
  for (int j = 0; j < static_cast<int>(joints.size()); ++j) {
    if (joints[j].kind == JointKind::Revolute) q_of_joint[j] = next_q++;
  }
  joint_names_.resize(next_q);
  significance_.resize(next_q);
  joint_body_.resize(next_q);

  while (!queue.empty()) {
    const int link = queue.front();
    queue.pop_front();
    Body body;
    body.name = links[link].name;
    body.inertia = links[link].inertia;
    const int pj = parent_joint[link];
    if (pj >= 0) {
      const JointSpec& js = joints[pj];
      body.parent = body_of_link[link_ids.find(js.parent)->second];
      body.joint = pj;
      body.origin_rotation = js.origin_rotation ? *js.origin_rotation : rpy_to_matrix(js.origin_rpy);
      body.origin_translation = js.origin_xyz;
      if (js.kind == JointKind::Revolute) {
        body.axis = js.axis.normalized();
        body.q_index = q_of_joint[pj];
        joint_names_[body.q_index] = js.name;
        significance_[body.q_index] = js.significance;
        joint_body_[body.q_index] = static_cast<int>(bodies_.size());
      } else {
        body.axis = Vec3::Zero();
      }
      body.identity_origin = body.origin_rotation == Mat3::Identity();
      for (int k = 0; k < 3; ++k) {
        if (std::abs(body.axis[k]) == 1.0) {
          body.unit_axis = k;
          body.axis_sign = body.axis[k];
        }
      }
    }
    body_of_link[link] = static_cast<int>(bodies_.size());
    bodies_.push_back(std::move(body));
    for (int cj : child_joints[link]) queue.push_back(link_ids.find(joints[cj].child)->second);
  }
  if (bodies_.size() != links.size()) {
    throw InputError("kinematic cycle: not every link is reachable from the root");
  }

  for (const Body& b : bodies_) total_mass_ += b.inertia.mass;
  if (!(total_mass_ > 0.0)) throw InputError("model total mass must be positive");

  for (const FrameSpec& f : description_.frames) {
    auto link = link_ids.find(f.link);
    if (link == link_ids.end()) {
      throw InputError("frame " + quoted(f.name) + " references unknown link " + quoted(f.link));
    }
    if (!finite(f.offset)) throw InputError("frame " + quoted(f.name) + " has non-finite offset");
    frames_.push_back({f.name, body_of_link[link->second], f.offset});
  }

  for (int l = 0; l < static_cast<int>(description_.limbs.size()); ++l) {
    const LimbSpec& limb = description_.limbs[l];
    auto it = std::find_if(joints.begin(), joints.end(),
                           [&](const JointSpec& js) { return js.name == limb.root_joint; });
    if (it == joints.end()) {
      throw InputError("limb " + quoted(limb.name) + " references unknown joint " +
                       quoted(limb.root_joint));
    }
    const int top = body_of_link[link_ids.find(it->child)->second];
    for (int b = 0; b < num_bodies(); ++b) {
      if (!is_ancestor(top, b)) continue;
      if (bodies_[b].limb != -1) {
        throw InputError("limbs " + quoted(limb_names_[bodies_[b].limb]) + " and " +
                         quoted(limb.name) + " overlap");
      }
      bodies_[b].limb = l;
    }
    limb_names_.push_back(limb.name);
  }

  if (!description_.left_foot.empty()) (void)frame_index(description_.left_foot);
  if (!description_.right_foot.empty()) (void)frame_index(description_.right_foot);
}

int RobotModel::body_index(std::string_view link) const {
  for (int i = 0; i < num_bodies(); ++i) {
    if (bodies_[i].name == link) return i;
  }
  throw InputError("unknown link " + quoted(link));
}

int RobotModel::joint_index(std::string_view joint) const {
  for (int i = 0; i < num_joints(); ++i) {
    if (joint_names_[i] == joint) return i;
  }
  throw InputError("unknown joint " + quoted(joint));
}

std::optional<int> RobotModel::find_frame(std::string_view frame) const {
  for (int i = 0; i < static_cast<int>(frames_.size()); ++i) {
    if (frames_[i].name == frame) return i;
  }
  return std::nullopt;
}

int RobotModel::frame_index(std::string_view frame) const {
  if (auto f = find_frame(frame)) return *f;
  throw InputError("unknown frame " + quoted(frame));
}

std::vector<std::string> RobotModel::group_names() const {
  std::vector<std::string> names = limb_names_;
  names.emplace_back("torso");
  return names;
}

bool RobotModel::is_ancestor(int ancestor, int body) const {
  for (int b = body; b >= 0; b = bodies_[b].parent) {
    if (b == ancestor) return true;
  }
  return false;
}

void check_configuration(const RobotModel& model, const VecX& q) {
  if (q.size() != model.num_joints()) {
    throw InputError("configuration has " + std::to_string(q.size()) + " entries, model has " +
                     std::to_string(model.num_joints()) + " joints");
  }
}

RobotModel reduced_model(const RobotModel& model, const VecX& q) {
  check_configuration(model, q);
  const auto& bodies = model.bodies();
  const auto& joints = model.description().joints;
  const int nb = model.num_bodies();
  const auto kept = [&](int b) {
    return b == 0 || (bodies[b].q_index >= 0 &&
                      model.joint_significance()[bodies[b].q_index] == Significance::Significant);
  };

  // Pose of each body frame in the frame of the kept body it merges into.
  std::vector<int> host(nb, 0);
  std::vector<Mat3> R(nb, Mat3::Identity());
  std::vector<Vec3> t(nb, Vec3::Zero());
  for (int b = 1; b < nb; ++b) {
    if (kept(b)) {
      host[b] = b;
      continue;
    }
    const int p = bodies[b].parent;
    host[b] = host[p];
    t[b] = t[p] + R[p] * bodies[b].origin_translation;
    R[b] = R[p] * bodies[b].origin_rotation;
    if (bodies[b].q_index >= 0) R[b] = R[b] * Eigen::AngleAxisd(q[bodies[b].q_index], bodies[b].axis).toRotationMatrix();
  }

  ModelDescription out;
  out.name = model.name();
  out.left_foot = model.description().left_foot;
  out.right_foot = model.description().right_foot;
  std::vector<int> link_of_body(nb, -1);
  for (int b = 0; b < nb; ++b) {
    if (!kept(b)) continue;
    double mass = 0.0;
    Vec3 moment = Vec3::Zero();
    for (int c = 0; c < nb; ++c) {
      if (host[c] != b) continue;
      mass += bodies[c].inertia.mass;
      moment += bodies[c].inertia.mass * (t[c] + R[c] * bodies[c].inertia.com_offset);
    }
    const Vec3 com = mass > 0.0 ? Vec3(moment / mass) : Vec3::Zero();
    Mat3 inertia = Mat3::Zero();
    for (int c = 0; c < nb; ++c) {
      if (host[c] != b) continue;
      const auto& in = bodies[c].inertia;
      const Vec3 d = t[c] + R[c] * in.com_offset - com;
      inertia += world_inertia(R[c], in.inertia_about_com) + point_inertia(in.mass, d);
    }
    inertia = 0.5 * (inertia + inertia.transpose());
    link_of_body[b] = static_cast<int>(out.links.size());
    out.links.push_back({bodies[b].name, {mass, com, inertia}});
  }
  // Joints in declaration order so that coordinates keep their relative order.
  std::vector<int> body_of_joint(joints.size(), -1);
  for (int b = 1; b < nb; ++b) body_of_joint[bodies[b].joint] = b;
  for (std::size_t j = 0; j < joints.size(); ++j) {
    const int b = body_of_joint[j];
    if (b < 0 || !kept(b)) continue;
    const int p = bodies[b].parent;
    JointSpec js;
    js.name = joints[j].name;
    js.kind = JointKind::Revolute;
    js.axis = bodies[b].axis;
    js.origin_xyz = t[p] + R[p] * bodies[b].origin_translation;
    js.origin_rotation = R[p] * bodies[b].origin_rotation;
    js.parent = bodies[host[p]].name;
    js.child = bodies[b].name;
    out.joints.push_back(std::move(js));
  }
  for (const auto& f : model.frames()) {
    out.frames.push_back({f.name, bodies[host[f.body]].name, t[f.body] + R[f.body] * f.offset});
  }
  return RobotModel(std::move(out));
}

Kinematics forward_kinematics(const RobotModel& model, const Quat& base_orientation,
                              const VecX& q) {
  Kinematics kin;
  forward_kinematics(model, base_orientation, q, kin);
  return kin;
}

void forward_kinematics(const RobotModel& model, const Quat& base_orientation, const VecX& q,
                        Kinematics& kin) {
  check_configuration(model, q);
  check_orientation(base_orientation);
  const auto& bodies = model.bodies();
  const int nb = model.num_bodies();
  kin.rotation.resize(nb);
  kin.position.resize(nb);
  kin.com.resize(nb);
  kin.axis.resize(nb);

  kin.rotation[0] = base_orientation.normalized().toRotationMatrix();
  kin.position[0].setZero();
  kin.axis[0].setZero();
  for (int i = 1; i < nb; ++i) {
    const auto& b = bodies[i];
    const Mat3& parent = kin.rotation[b.parent];
    const Mat3 joint_frame = b.identity_origin ? parent : Mat3(parent * b.origin_rotation);
    kin.position[i] = kin.position[b.parent] + parent * b.origin_translation;
    if (b.q_index >= 0 && b.unit_axis >= 0) {
      // Rotation about a frame axis only mixes the other two columns.
      const int k = b.unit_axis;
      const int k1 = (k + 1) % 3;
      const int k2 = (k + 2) % 3;
      const double angle = b.axis_sign * q[b.q_index];
      const double c = std::cos(angle);
      const double s = std::sin(angle);
      Mat3& R = kin.rotation[i];
      R.col(k) = joint_frame.col(k);
      R.col(k1) = c * joint_frame.col(k1) + s * joint_frame.col(k2);
      R.col(k2) = c * joint_frame.col(k2) - s * joint_frame.col(k1);
      kin.axis[i] = b.axis_sign * joint_frame.col(k);
    } else if (b.q_index >= 0) {
      kin.axis[i] = joint_frame * b.axis;
      kin.rotation[i] = joint_frame * Eigen::AngleAxisd(q[b.q_index], b.axis).toRotationMatrix();
    } else {
      kin.axis[i].setZero();
      kin.rotation[i] = joint_frame;
    }
  }
  for (int i = 0; i < nb; ++i) {
    kin.com[i] = kin.position[i] + kin.rotation[i] * bodies[i].inertia.com_offset;
  }
}

Vec3 frame_position(const RobotModel& model, const Kinematics& kin, int frame) {
  const auto& f = model.frames().at(frame);
  return kin.position[f.body] + kin.rotation[f.body] * f.offset;
}

Vec3 com_position(const RobotModel& model, const Kinematics& kin) {
  Vec3 weighted = Vec3::Zero();
  for (int i = 0; i < model.num_bodies(); ++i) {
    weighted += model.bodies()[i].inertia.mass * kin.com[i];
  }
  return weighted / model.total_mass();
}

Vec3 com_position(const RobotModel& model, const Quat& base_orientation, const VecX& q) {
  return com_position(model, forward_kinematics(model, base_orientation, q));
}

MatX CentroidalMap::A_k() const {
  MatX out(3, A_l.cols());
  out << A_v, A_omega, A_j;
  return out;
}

MatX CentroidalMap::A_G() const {
  MatX out(6, A_l.cols());
  out << A_l, A_k();
  return out;
}

CentroidalState centroidal_momentum(const CentroidalMap& cmap, const VecX& nu) {
  if (nu.size() != cmap.A_l.cols()) throw InputError("generalized velocity has wrong size");
  CentroidalState h;
  h.l_G = cmap.A_l * nu;
  h.k_G = cmap.A_v * nu.head<3>() + cmap.A_omega * nu.segment<3>(3) + cmap.A_j * nu.tail(nu.size() - 6);
  return h;
}

namespace {

// Subtree mass, first moment and inertia about the world origin.
void accumulate_subtrees(const RobotModel& model, const Kinematics& kin, CentroidalScratch& sub) {
  const auto& bodies = model.bodies();
  const int nb = model.num_bodies();
  sub.mass.resize(nb);
  sub.moment.resize(nb);
  sub.inertia.resize(nb);
  for (int i = 0; i < nb; ++i) {
    const auto& in = bodies[i].inertia;
    const Vec3& c = kin.com[i];
    sub.mass[i] = in.mass;
    sub.moment[i] = in.mass * c;
    sub.inertia[i] = world_inertia(kin.rotation[i], in.inertia_about_com) + point_inertia(in.mass, c);
  }
  for (int i = nb - 1; i > 0; --i) {
    const int p = bodies[i].parent;
    sub.mass[p] += sub.mass[i];
    sub.moment[p] += sub.moment[i];
    sub.inertia[p] += sub.inertia[i];
  }
}

// Base blocks: the whole tree moves rigidly with the base.
void base_blocks(double m, const Vec3& moment, const Mat3& inertia, Vec3& p_G, Mat3& I_com, Mat3& A_v,
                 Mat3& A_omega) {
  p_G = moment / m;
  const Vec3 c_root = moment / m;
  const Vec3 offset = m * (c_root - p_G);
  I_com = inertia - point_inertia(m, c_root);
  A_v = skew(offset);
  A_omega = I_com - skew(offset) * skew(c_root);
}

// Angular momentum column of joint body i, with v the subtree CoM velocity
// per unit joint rate.
Vec3 joint_column(const Kinematics& kin, const CentroidalScratch& sub, int i, const Vec3& p_G, Vec3& v) {
  const Vec3 c = sub.moment[i] / sub.mass[i];
  const Mat3 I_sub = sub.inertia[i] - point_inertia(sub.mass[i], c);
  const Vec3& a = kin.axis[i];
  v = a.cross(c - kin.position[i]);
  return I_sub * a + sub.mass[i] * (c - p_G).cross(v);
}

CentroidalMap composite_map(const RobotModel& model, const Kinematics& kin) {
  const auto& bodies = model.bodies();
  const int nb = model.num_bodies();
  const int n = model.num_joints();
  CentroidalScratch sub;
  accumulate_subtrees(model, kin, sub);

  CentroidalMap cmap;
  cmap.mass = sub.mass[0];
  base_blocks(sub.mass[0], sub.moment[0], sub.inertia[0], cmap.p_G, cmap.I_com, cmap.A_v, cmap.A_omega);
  cmap.A_l = MatX::Zero(3, n + 6);
  cmap.A_j = MatX::Zero(3, n);
  cmap.A_l.block<3, 3>(0, 0) = cmap.mass * Mat3::Identity();
  cmap.A_l.block<3, 3>(0, 3) = -cmap.mass * skew(cmap.p_G);

  for (int i = 1; i < nb; ++i) {
    const int k = bodies[i].q_index;
    if (k < 0 || sub.mass[i] <= 0.0) continue;
    Vec3 v;
    cmap.A_j.col(k) = joint_column(kin, sub, i, cmap.p_G, v);
    cmap.A_l.col(6 + k) = sub.mass[i] * v;
  }
  return cmap;
}

MatX angular_jacobian(const RobotModel& model, const Kinematics& kin, int body) {
  MatX J = MatX::Zero(3, model.num_velocities());
  J.block<3, 3>(0, 3).setIdentity();
  for (int b = body; b > 0; b = model.bodies()[b].parent) {
    const int k = model.bodies()[b].q_index;
    if (k >= 0) J.col(6 + k) = kin.axis[b];
  }
  return J;
}

CentroidalMap mass_matrix_map(const RobotModel& model, const Kinematics& kin) {
  const auto& bodies = model.bodies();
  const int n = model.num_joints();
  const int nv = n + 6;

  // Top six rows of the joint-space mass matrix in (v_b, omega_b, qdot).
  MatX top = MatX::Zero(6, nv);
  for (int i = 0; i < model.num_bodies(); ++i) {
    const auto& in = bodies[i].inertia;
    const MatX Jv = point_jacobian(model, kin, i, kin.com[i]);
    const MatX Jw = angular_jacobian(model, kin, i);
    const Mat3 Iw = world_inertia(kin.rotation[i], in.inertia_about_com);
    top.topRows<3>() += in.mass * Jv.leftCols<3>().transpose() * Jv;
    top.bottomRows<3>() +=
        in.mass * Jv.middleCols<3>(3).transpose() * Jv + Jw.middleCols<3>(3).transpose() * Iw * Jw;
  }

  CentroidalMap cmap;
  cmap.mass = model.total_mass();
  cmap.p_G = com_position(model, kin);
  // Momentum transform from the base origin to the CoM (world-aligned axes).
  Eigen::Matrix<double, 6, 6> X = Eigen::Matrix<double, 6, 6>::Identity();
  X.block<3, 3>(3, 0) = -skew(cmap.p_G);
  const MatX AG = X * top;
  cmap.A_l = AG.topRows<3>();
  cmap.A_v = AG.block<3, 3>(3, 0);
  cmap.A_omega = AG.block<3, 3>(3, 3);
  cmap.A_j = AG.block(3, 6, 3, n);
  cmap.I_com = cmap.A_omega;
  return cmap;
}

}  // namespace

CentroidalMap compute_centroidal_map(const RobotModel& model, const Kinematics& kin, CmmRoute route) {
  return route == CmmRoute::Composite ? composite_map(model, kin) : mass_matrix_map(model, kin);
}

CentroidalMap compute_centroidal_map(const RobotModel& model, const Quat& base_orientation,
                                     const VecX& q, CmmRoute route) {
  return compute_centroidal_map(model, forward_kinematics(model, base_orientation, q), route);
}

OmegaIdentityCheck verify_A_omega_identity(const RobotModel& model, const Quat& base_orientation,
                                           const VecX& q) {
  const CentroidalMap cmap = compute_centroidal_map(model, base_orientation, q);

  // Composite inertia about the CoM in base coordinates, straight from per-body data.
  const Kinematics local = forward_kinematics(model, Quat::Identity(), q);
  const Vec3 com_local = com_position(model, local);
  Mat3 inertia_base = Mat3::Zero();
  for (int i = 0; i < model.num_bodies(); ++i) {
    const auto& in = model.bodies()[i].inertia;
    inertia_base += world_inertia(local.rotation[i], in.inertia_about_com) +
                    point_inertia(in.mass, local.com[i] - com_local);
  }
  const Mat3 R = base_orientation.normalized().toRotationMatrix();
  const Mat3 expected = R * inertia_base * R.transpose();

  OmegaIdentityCheck check;
  check.residual = (cmap.A_omega - expected).norm() / cmap.A_omega.norm();
  check.min_singular_value = Eigen::JacobiSVD<Mat3>(cmap.A_omega).singularValues().minCoeff();
  return check;
}

AngularTerms angular_momentum_terms(const RobotModel& model, const Kinematics& kin, const VecX& qdot,
                                    CentroidalScratch& scratch) {
  check_configuration(model, qdot);
  const auto& bodies = model.bodies();
  const int nb = model.num_bodies();
  scratch.inertia.resize(nb);
  scratch.omega.resize(nb);
  scratch.origin_velocity.resize(nb);

  double mass = 0.0;
  Vec3 moment = Vec3::Zero();
  Mat3 inertia = Mat3::Zero();
  for (int i = 0; i < nb; ++i) {
    const auto& in = bodies[i].inertia;
    const Vec3& c = kin.com[i];
    scratch.inertia[i] = world_inertia(kin.rotation[i], in.inertia_about_com);
    mass += in.mass;
    moment += in.mass * c;
    inertia += scratch.inertia[i] + point_inertia(in.mass, c);
  }
  AngularTerms out;
  Mat3 I_com;
  base_blocks(mass, moment, inertia, out.p_G, I_com, out.A_v, out.A_omega);

  // Joint rates only: the base neither translates nor rotates.
  scratch.omega[0].setZero();
  scratch.origin_velocity[0].setZero();
  for (int i = 1; i < nb; ++i) {
    const auto& b = bodies[i];
    const int p = b.parent;
    scratch.origin_velocity[i] =
        scratch.origin_velocity[p] + scratch.omega[p].cross(kin.position[i] - kin.position[p]);
    scratch.omega[i] = scratch.omega[p];
    if (b.q_index >= 0) scratch.omega[i] += kin.axis[i] * qdot[b.q_index];
    const Vec3 v = scratch.origin_velocity[i] + scratch.omega[i].cross(kin.com[i] - kin.position[i]);
    out.joint_momentum += scratch.inertia[i] * scratch.omega[i] + b.inertia.mass * (kin.com[i] - out.p_G).cross(v);
  }
  return out;
}

MatX point_jacobian(const RobotModel& model, const Kinematics& kin, int body, const Vec3& point) {
  MatX J = MatX::Zero(3, model.num_velocities());
  J.block<3, 3>(0, 0).setIdentity();
  J.block<3, 3>(0, 3) = -skew(point);
  for (int b = body; b > 0; b = model.bodies()[b].parent) {
    const int k = model.bodies()[b].q_index;
    if (k >= 0) J.col(6 + k) = kin.axis[b].cross(point - kin.position[b]);
  }
  return J;
}

MatX point_jacobian(const RobotModel& model, const Quat& base_orientation, const VecX& q,
                    std::string_view frame) {
  const int f = model.frame_index(frame);
  const Kinematics kin = forward_kinematics(model, base_orientation, q);
  return point_jacobian(model, kin, model.frames()[f].body, frame_position(model, kin, f));
}

BodyVelocities body_velocities(const RobotModel& model, const Kinematics& kin, const VecX& nu) {
  if (nu.size() != model.num_velocities()) throw InputError("generalized velocity has wrong size");
  const auto& bodies = model.bodies();
  const int nb = model.num_bodies();
  std::vector<Vec3> origin_velocity(nb);
  BodyVelocities vel;
  vel.angular.resize(nb);
  vel.com_linear.resize(nb);
  origin_velocity[0] = nu.head<3>();
  vel.angular[0] = nu.segment<3>(3);
  for (int i = 1; i < nb; ++i) {
    const int p = bodies[i].parent;
    origin_velocity[i] =
        origin_velocity[p] + vel.angular[p].cross(kin.position[i] - kin.position[p]);
    vel.angular[i] = vel.angular[p];
    if (bodies[i].q_index >= 0) vel.angular[i] += kin.axis[i] * nu[6 + bodies[i].q_index];
  }
  for (int i = 0; i < nb; ++i) {
    vel.com_linear[i] = origin_velocity[i] + vel.angular[i].cross(kin.com[i] - kin.position[i]);
  }
  return vel;
}

BodyMomenta body_momenta(const RobotModel& model, const Kinematics& kin, const VecX& nu) {
  const BodyVelocities vel = body_velocities(model, kin, nu);
  const auto& bodies = model.bodies();
  const int nb = model.num_bodies();
  const Vec3 p_G = com_position(model, kin);

  BodyMomenta out;
  out.linear.resize(nb);
  out.angular.resize(nb);
  for (int i = 0; i < nb; ++i) {
    out.linear[i] = bodies[i].inertia.mass * vel.com_linear[i];
    out.total_linear += out.linear[i];
  }
  const Vec3 v_G = out.total_linear / model.total_mass();
  for (int i = 0; i < nb; ++i) {
    const auto& in = bodies[i].inertia;
    out.angular[i] = world_inertia(kin.rotation[i], in.inertia_about_com) * vel.angular[i] +
                     in.mass * (kin.com[i] - p_G).cross(vel.com_linear[i] - v_G);
    out.total_angular += out.angular[i];
  }
  return out;
}

}  // namespace flightopt
