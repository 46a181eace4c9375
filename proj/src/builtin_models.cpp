#include "flightopt/model_io.hpp"

#include <array>

namespace flightopt {

namespace {

// Solid cuboid about its centroid.
Mat3 box_inertia(double mass, double x, double y, double z) {
  return Vec3(mass / 12.0 * (y * y + z * z), mass / 12.0 * (x * x + z * z),
              mass / 12.0 * (x * x + y * y))
      .asDiagonal();
}

LinkSpec link(std::string name, double mass, Vec3 com, const Vec3& box) {
  return {std::move(name), {mass, com, box_inertia(mass, box.x(), box.y(), box.z())}};
}

JointSpec revolute(std::string name, std::string parent, std::string child, Vec3 axis, Vec3 xyz,
                   Vec3 rpy = Vec3::Zero(), Significance sig = Significance::Significant) {
  JointSpec j;
  j.name = std::move(name);
  j.kind = JointKind::Revolute;
  j.axis = axis;
  j.origin_xyz = xyz;
  j.origin_rpy = rpy;
  j.parent = std::move(parent);
  j.child = std::move(child);
  j.significance = sig;
  return j;
}

constexpr auto kFrozen = Significance::Frozen;
constexpr auto kSignificant = Significance::Significant;

ModelDescription planar3() {
  ModelDescription d;
  d.name = "planar3";
  d.links.push_back(link("torso", 10.0, {0, 0, 0.2}, {0.2, 0.3, 0.4}));
  for (const auto& [side, y] : std::array<std::pair<const char*, double>, 2>{{{"left", 0.1}, {"right", -0.1}}}) {
    const std::string s = side;
    d.links.push_back(link(s + "_leg", 2.0, {0, 0, -0.25}, {0.06, 0.06, 0.5}));
    d.joints.push_back(revolute(s + "_hip_pitch", "torso", s + "_leg", Vec3::UnitY(), {0, y, 0}));
    d.frames.push_back({s + "_foot", s + "_leg", {0, 0, -0.5}});
    d.limbs.push_back({s + "_leg", s + "_hip_pitch"});
  }
  d.left_foot = "left_foot";
  d.right_foot = "right_foot";
  return d;
}

// Legs in a mid-stance crouch at q = 0: thigh pitched forward, knee bent,
// sole level and directly below the hip.
void add_leg(ModelDescription& d, const std::string& s, double y) {
  const std::string torso = d.links.front().name;
  d.links.push_back(link(s + "_hip_yaw_link", 0.6, {0, 0, -0.03}, {0.08, 0.08, 0.06}));
  d.links.push_back(link(s + "_hip_roll_link", 0.6, {0, 0, 0}, {0.08, 0.08, 0.08}));
  d.links.push_back(link(s + "_thigh", 2.5, {0, 0, -0.15}, {0.08, 0.08, 0.30}));
  d.links.push_back(link(s + "_shin", 1.5, {0, 0, -0.13}, {0.06, 0.06, 0.30}));
  d.links.push_back(link(s + "_ankle_link", 0.1, {0, 0, 0}, {0.03, 0.03, 0.03}));
  d.links.push_back(link(s + "_foot_link", 0.6, {0.03, 0, -0.03}, {0.20, 0.08, 0.04}));

  d.joints.push_back(revolute(s + "_hip_yaw", torso, s + "_hip_yaw_link", Vec3::UnitZ(),
                              {0, y, -0.05}, Vec3::Zero(), kFrozen));
  d.joints.push_back(revolute(s + "_hip_roll", s + "_hip_yaw_link", s + "_hip_roll_link",
                              Vec3::UnitX(), {0, 0, -0.06}));
  d.joints.push_back(revolute(s + "_hip_pitch", s + "_hip_roll_link", s + "_thigh", Vec3::UnitY(),
                              {0, 0, 0}, {0, -0.35, 0}));
  d.joints.push_back(
      revolute(s + "_knee", s + "_thigh", s + "_shin", Vec3::UnitY(), {0, 0, -0.30}, {0, 0.70, 0}));
  d.joints.push_back(revolute(s + "_ankle_pitch", s + "_shin", s + "_ankle_link", Vec3::UnitY(),
                              {0, 0, -0.30}, {0, -0.35, 0}, kFrozen));
  d.joints.push_back(revolute(s + "_ankle_roll", s + "_ankle_link", s + "_foot_link",
                              Vec3::UnitX(), {0, 0, 0}, Vec3::Zero(), kFrozen));
  d.frames.push_back({s + "_foot", s + "_foot_link", {0, 0, -0.05}});
  d.limbs.push_back({s + "_leg", s + "_hip_yaw"});
}

void add_arm(ModelDescription& d, const std::string& s, double y) {
  const std::string torso = d.links.front().name;
  d.links.push_back(link(s + "_shoulder_pitch_link", 0.2, {0, 0, 0}, {0.05, 0.05, 0.05}));
  d.links.push_back(link(s + "_shoulder_roll_link", 0.2, {0, 0, -0.02}, {0.05, 0.05, 0.05}));
  d.links.push_back(link(s + "_upper_arm", 0.8, {0, 0, -0.09}, {0.05, 0.05, 0.20}));
  d.links.push_back(link(s + "_forearm", 0.6, {0, 0, -0.10}, {0.04, 0.04, 0.20}));

  d.joints.push_back(revolute(s + "_shoulder_pitch", torso, s + "_shoulder_pitch_link",
                              Vec3::UnitY(), {0, y, 0.42}, Vec3::Zero(), kSignificant));
  d.joints.push_back(revolute(s + "_shoulder_roll", s + "_shoulder_pitch_link",
                              s + "_shoulder_roll_link", Vec3::UnitX(), {0, 0, 0}, Vec3::Zero(),
                              kFrozen));
  d.joints.push_back(revolute(s + "_shoulder_yaw", s + "_shoulder_roll_link", s + "_upper_arm",
                              Vec3::UnitZ(), {0, 0, -0.05}, Vec3::Zero(), kFrozen));
  d.joints.push_back(revolute(s + "_elbow", s + "_upper_arm", s + "_forearm", Vec3::UnitY(),
                              {0, 0, -0.18}, {0, -0.30, 0}, kFrozen));
  d.frames.push_back({s + "_hand", s + "_forearm", {0, 0, -0.20}});
  d.limbs.push_back({s + "_arm", s + "_shoulder_pitch"});
}

ModelDescription biped12() {
  ModelDescription d;
  d.name = "biped12";
  d.links.push_back(link("torso", 28.0, {0, 0, 0.22}, {0.20, 0.30, 0.45}));
  add_leg(d, "left", 0.1);
  add_leg(d, "right", -0.1);
  d.left_foot = "left_foot";
  d.right_foot = "right_foot";
  return d;
}

ModelDescription humanoid20() {
  ModelDescription d;
  d.name = "humanoid20";
  d.links.push_back(link("torso", 24.5, {0, 0, 0.22}, {0.20, 0.30, 0.45}));
  add_leg(d, "left", 0.1);
  add_leg(d, "right", -0.1);
  add_arm(d, "left", 0.18);
  add_arm(d, "right", -0.18);
  d.left_foot = "left_foot";
  d.right_foot = "right_foot";
  return d;
}

}  // namespace

std::vector<std::string> builtin_model_names() { return {"planar3", "biped12", "humanoid20"}; }

RobotModel builtin_model(std::string_view identifier) {
  if (identifier == "planar3") return RobotModel(planar3());
  if (identifier == "biped12") return RobotModel(biped12());
  if (identifier == "humanoid20") return RobotModel(humanoid20());
  throw InputError("unknown built-in model '" + std::string(identifier) + "'");
}

}  // namespace flightopt
