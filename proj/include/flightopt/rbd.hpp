#pragma once

// Floating-base kinematic trees: forward kinematics, center of mass, point
// Jacobians and the centroidal momentum matrix.
//
// Conventions used throughout the library:
//  - the base link sits at the world origin; its translation is never
//    represented because the angular part of the centroidal dynamics does not
//    depend on it,
//  - base orientation is a unit quaternion rotating body coordinates into
//    world coordinates,
//  - the generalized velocity is nu = (v_b, omega_b, qdot), with v_b the
//    world velocity of the base origin and omega_b the base angular velocity,
//    both expressed in world coordinates.

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace flightopt {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using Quat = Eigen::Quaterniond;

/// Invalid arguments: wrong dimensions, unknown names, non-physical data.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical routine could not produce a trustworthy answer.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return s;
}

/// Mass properties of a link. The inertia is taken about the link CoM and
/// expressed in link coordinates.
struct SpatialInertia {
  double mass = 0.0;
  Vec3 com_offset = Vec3::Zero();
  Mat3 inertia_about_com = Mat3::Zero();

  /// Throws InputError("non-physical inertia ...") if the data violates
  /// m >= 0, symmetry, positive semidefiniteness or the triangle inequality
  /// on the principal moments.
  void validate(std::string_view owner) const;
};

enum class JointKind { Revolute, Fixed };
enum class Significance { Significant, Frozen };

struct JointSpec {
  std::string name;
  JointKind kind = JointKind::Revolute;
  Vec3 axis = Vec3::UnitZ();
  // Parent link frame -> joint frame. Roll-pitch-yaw about fixed axes,
  // R = Rz(yaw) * Ry(pitch) * Rx(roll), as in URDF.
  Vec3 origin_xyz = Vec3::Zero();
  Vec3 origin_rpy = Vec3::Zero();
  // When set, used instead of origin_rpy (keeps composed rotations exact).
  std::optional<Mat3> origin_rotation;
  std::string parent;
  std::string child;
  Significance significance = Significance::Significant;
};

struct LinkSpec {
  std::string name;
  SpatialInertia inertia;
};

/// A named point rigidly attached to a link (feet, hands).
struct FrameSpec {
  std::string name;
  std::string link;
  Vec3 offset = Vec3::Zero();
};

/// A limb is the subtree below `root_joint`; used for momentum attribution.
struct LimbSpec {
  std::string name;
  std::string root_joint;
};

struct ModelDescription {
  std::string name;
  std::vector<LinkSpec> links;
  std::vector<JointSpec> joints;
  std::vector<FrameSpec> frames;
  std::vector<LimbSpec> limbs;
  std::string left_foot;
  std::string right_foot;
};

Mat3 rpy_to_matrix(const Vec3& rpy);

/// Immutable kinematic tree. Links are stored in topological order with the
/// floating base at index 0. Joint coordinates follow the declaration order of
/// the revolute joints in the description.
class RobotModel {
 public:
  struct Body {
    std::string name;
    int parent = -1;       // parent body index, -1 for the base
    int joint = -1;        // index into description().joints, -1 for the base
    int q_index = -1;      // coordinate index for revolute joints, else -1
    Mat3 origin_rotation = Mat3::Identity();
    Vec3 origin_translation = Vec3::Zero();
    Vec3 axis = Vec3::UnitZ();
    SpatialInertia inertia;
    int limb = -1;         // index into limbs(), -1 for the torso group
    bool identity_origin = true;
    int unit_axis = -1;    // k when axis = +-e_k exactly
    double axis_sign = 1.0;
  };

  struct Frame {
    std::string name;
    int body = 0;
    Vec3 offset = Vec3::Zero();
  };

  /// Validates the description and builds the tree. Throws InputError.
  explicit RobotModel(ModelDescription description);

  const ModelDescription& description() const { return description_; }
  const std::string& name() const { return description_.name; }

  int num_joints() const { return static_cast<int>(joint_names_.size()); }
  int num_bodies() const { return static_cast<int>(bodies_.size()); }
  int num_velocities() const { return num_joints() + 6; }
  double total_mass() const { return total_mass_; }

  const std::vector<Body>& bodies() const { return bodies_; }
  const std::vector<Frame>& frames() const { return frames_; }

  /// Revolute joint names in coordinate order.
  const std::vector<std::string>& joint_names() const { return joint_names_; }
  const std::vector<Significance>& joint_significance() const { return significance_; }
  /// Body driven by each coordinate.
  const std::vector<int>& joint_bodies() const { return joint_body_; }

  int body_index(std::string_view link) const;
  int joint_index(std::string_view joint) const;
  int frame_index(std::string_view frame) const;
  std::optional<int> find_frame(std::string_view frame) const;

  /// Limb names; momentum groups are these plus a trailing "torso" group.
  const std::vector<std::string>& limb_names() const { return limb_names_; }
  std::vector<std::string> group_names() const;

  int left_foot() const { return frame_index(description_.left_foot); }
  int right_foot() const { return frame_index(description_.right_foot); }

  /// True if `ancestor` lies on the path from `body` to the base (inclusive).
  bool is_ancestor(int ancestor, int body) const;

 private:
  ModelDescription description_;
  std::vector<Body> bodies_;
  std::vector<Frame> frames_;
  std::vector<std::string> joint_names_;
  std::vector<Significance> significance_;
  std::vector<int> joint_body_;
  std::vector<std::string> limb_names_;
  double total_mass_ = 0.0;
};

using RobotModelPtr = std::shared_ptr<const RobotModel>;

struct BaseState {
  Quat orientation = Quat::Identity();
  Vec3 angular_velocity = Vec3::Zero();
  std::optional<Vec3> translational_velocity;
};

/// The model with every frozen joint locked at its entry in `q` and every
/// rigidly attached link merged into its parent. Only significant joints
/// remain, in their original order; feet and frames are carried over, limb
/// groups are dropped. Dynamics agree with the full model up to roundoff.
RobotModel reduced_model(const RobotModel& model, const VecX& q);

/// World poses of all bodies with the base at the origin.
struct Kinematics {
  std::vector<Mat3> rotation;
  std::vector<Vec3> position;  // body frame origin (= joint location)
  std::vector<Vec3> com;       // body CoM
  std::vector<Vec3> axis;      // world joint axis (zero for base / fixed)
};

Kinematics forward_kinematics(const RobotModel& model, const Quat& base_orientation,
                              const VecX& q);
/// Same, reusing the storage of `out`.
void forward_kinematics(const RobotModel& model, const Quat& base_orientation, const VecX& q,
                        Kinematics& out);

Vec3 frame_position(const RobotModel& model, const Kinematics& kin, int frame);

Vec3 com_position(const RobotModel& model, const Quat& base_orientation, const VecX& q);
Vec3 com_position(const RobotModel& model, const Kinematics& kin);

/// Centroidal momentum matrix blocks, h_G = [A_l; A_v A_omega A_j] nu.
struct CentroidalMap {
  MatX A_l;      // 3 x (n+6)
  Mat3 A_v = Mat3::Zero();
  Mat3 A_omega = Mat3::Zero();
  MatX A_j;      // 3 x n
  Vec3 p_G = Vec3::Zero();
  Mat3 I_com = Mat3::Zero();  // composite inertia about the CoM, world axes
  double mass = 0.0;

  MatX A_k() const;
  MatX A_G() const;
};

struct CentroidalState {
  Vec3 l_G = Vec3::Zero();
  Vec3 k_G = Vec3::Zero();
};

enum class CmmRoute {
  Composite,   // subtree (composite-body) accumulation
  MassMatrix,  // momentum transform of the top six mass-matrix rows
};

CentroidalMap compute_centroidal_map(const RobotModel& model, const Quat& base_orientation,
                                     const VecX& q, CmmRoute route = CmmRoute::Composite);
CentroidalMap compute_centroidal_map(const RobotModel& model, const Kinematics& kin,
                                     CmmRoute route = CmmRoute::Composite);

CentroidalState centroidal_momentum(const CentroidalMap& cmap, const VecX& nu);

/// Per-body buffers, kept between calls to avoid reallocation.
struct CentroidalScratch {
  std::vector<double> mass;
  std::vector<Vec3> moment;
  std::vector<Mat3> inertia;
  std::vector<Vec3> omega;
  std::vector<Vec3> origin_velocity;
};

/// The angular rows needed to propagate the base rate: A_v, A_omega and
/// A_j qdot, the last from body velocities without forming A_j. The base
/// blocks use the same arithmetic as the composite route.
struct AngularTerms {
  Mat3 A_v = Mat3::Zero();
  Mat3 A_omega = Mat3::Zero();
  Vec3 joint_momentum = Vec3::Zero();
  Vec3 p_G = Vec3::Zero();
};

AngularTerms angular_momentum_terms(const RobotModel& model, const Kinematics& kin, const VecX& qdot,
                                    CentroidalScratch& scratch);

/// Relative Frobenius error between A_omega and R * Ibar_com * R^T, where
/// Ibar_com is the composite inertia about the CoM in base coordinates,
/// assembled directly from per-body data.
struct OmegaIdentityCheck {
  double residual = 0.0;
  double min_singular_value = 0.0;
};

OmegaIdentityCheck verify_A_omega_identity(const RobotModel& model, const Quat& base_orientation,
                                           const VecX& q);

/// 3 x (n+6) Jacobian of the world linear velocity of a frame origin.
MatX point_jacobian(const RobotModel& model, const Quat& base_orientation, const VecX& q,
                    std::string_view frame);
MatX point_jacobian(const RobotModel& model, const Kinematics& kin, int body, const Vec3& point);

/// Per-body velocities by recursive propagation; independent of the CMM.
struct BodyVelocities {
  std::vector<Vec3> angular;
  std::vector<Vec3> com_linear;
};

BodyVelocities body_velocities(const RobotModel& model, const Kinematics& kin, const VecX& nu);

/// Momentum of every body about the system CoM. Linear velocities are taken
/// relative to the CoM velocity so each term is independent of v_b.
struct BodyMomenta {
  std::vector<Vec3> linear;
  std::vector<Vec3> angular;
  Vec3 total_linear = Vec3::Zero();
  Vec3 total_angular = Vec3::Zero();
};

BodyMomenta body_momenta(const RobotModel& model, const Kinematics& kin, const VecX& nu);

void check_configuration(const RobotModel& model, const VecX& q);

}  // namespace flightopt
