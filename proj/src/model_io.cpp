#include "flightopt/model_io.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace flightopt {

namespace pt = boost::property_tree;
using json = nlohmann::json;

ModelParseError::ModelParseError(std::string message, std::string element, int line)
    : InputError([&] {
        std::string what = message;
        if (!element.empty()) what += " [" + element + "]";
        if (line > 0) what += " (line " + std::to_string(line) + ")";
        return what;
      }()),
      element_(std::move(element)),
      line_(line) {}

namespace {

// property_tree drops source positions; recover the line of an element by
// scanning for its opening tag and name attribute.
int locate(std::string_view text, std::string_view tag, std::string_view name) {
  const std::string open = "<" + std::string(tag);
  std::size_t pos = 0;
  while ((pos = text.find(open, pos)) != std::string_view::npos) {
    const std::size_t end = text.find('>', pos);
    const std::string_view head = text.substr(pos, end == std::string_view::npos ? text.size() - pos : end - pos);
    const bool match = name.empty() || head.find("\"" + std::string(name) + "\"") != std::string_view::npos ||
                       head.find("'" + std::string(name) + "'") != std::string_view::npos;
    if (match) return 1 + static_cast<int>(std::count(text.begin(), text.begin() + pos, '\n'));
    pos += open.size();
  }
  return 0;
}

class UrdfReader {
 public:
  explicit UrdfReader(std::string_view text) : text_(text) {}

  [[noreturn]] void fail(const std::string& message, std::string_view tag,
                         std::string_view name) const {
    std::string element(tag);
    if (!name.empty()) element += " '" + std::string(name) + "'";
    throw ModelParseError(message, element, locate(text_, tag, name));
  }

  std::vector<double> numbers(const std::string& raw, std::size_t count, std::string_view tag,
                              std::string_view name, std::string_view what) const {
    std::istringstream in(raw);
    std::vector<double> values;
    std::string token;
    while (in >> token) {
      double v = 0.0;
      try {
        std::size_t used = 0;
        v = std::stod(token, &used);
        if (used != token.size()) throw std::invalid_argument(token);
      } catch (const std::exception&) {
        fail("malformed number '" + token + "' in " + std::string(what), tag, name);
      }
      if (!std::isfinite(v)) fail("non-finite value in " + std::string(what), tag, name);
      values.push_back(v);
    }
    if (values.size() != count) {
      fail(std::string(what) + " needs " + std::to_string(count) + " values", tag, name);
    }
    return values;
  }

  Vec3 vec3(const pt::ptree& node, const std::string& attr, const Vec3& fallback,
            std::string_view tag, std::string_view name, std::string_view what) const {
    auto raw = node.get_optional<std::string>("<xmlattr>." + attr);
    if (!raw) return fallback;
    const auto v = numbers(*raw, 3, tag, name, what);
    return {v[0], v[1], v[2]};
  }

  double scalar(const pt::ptree& node, const std::string& attr, std::string_view tag,
                std::string_view name, std::string_view what) const {
    auto raw = node.get_optional<std::string>("<xmlattr>." + attr);
    if (!raw) fail("missing attribute '" + attr + "' in " + std::string(what), tag, name);
    return numbers(*raw, 1, tag, name, what).front();
  }

  LinkSpec read_link(const pt::ptree& node) const {
    LinkSpec link;
    link.name = node.get<std::string>("<xmlattr>.name", "");
    if (link.name.empty()) fail("link without a name", "link", "");
    auto inertial = node.get_child_optional("inertial");
    if (!inertial) fail("missing inertial block", "link", link.name);

    Vec3 xyz = Vec3::Zero();
    Vec3 rpy = Vec3::Zero();
    if (auto origin = inertial->get_child_optional("origin")) {
      xyz = vec3(*origin, "xyz", xyz, "link", link.name, "inertial origin xyz");
      rpy = vec3(*origin, "rpy", rpy, "link", link.name, "inertial origin rpy");
    }
    auto mass = inertial->get_child_optional("mass");
    if (!mass) fail("missing mass in inertial block", "link", link.name);
    auto inertia = inertial->get_child_optional("inertia");
    if (!inertia) fail("missing inertia in inertial block", "link", link.name);

    const auto s = [&](const char* key) { return scalar(*inertia, key, "link", link.name, "inertia"); };
    Mat3 I;
    I << s("ixx"), s("ixy"), s("ixz"), s("ixy"), s("iyy"), s("iyz"), s("ixz"), s("iyz"), s("izz");
    const Mat3 R = rpy_to_matrix(rpy);
    link.inertia.mass = scalar(*mass, "value", "link", link.name, "mass");
    link.inertia.com_offset = xyz;
    link.inertia.inertia_about_com = R * I * R.transpose();
    try {
      link.inertia.validate(link.name);
    } catch (const InputError& e) {
      fail(e.what(), "link", link.name);
    }
    return link;
  }

  JointSpec read_joint(const pt::ptree& node) const {
    JointSpec joint;
    joint.name = node.get<std::string>("<xmlattr>.name", "");
    if (joint.name.empty()) fail("joint without a name", "joint", "");
    const std::string type = node.get<std::string>("<xmlattr>.type", "");
    if (type == "revolute" || type == "continuous") {
      joint.kind = JointKind::Revolute;
    } else if (type == "fixed") {
      joint.kind = JointKind::Fixed;
    } else {
      fail("unknown joint type '" + type + "'", "joint", joint.name);
    }
    if (auto origin = node.get_child_optional("origin")) {
      joint.origin_xyz = vec3(*origin, "xyz", Vec3::Zero(), "joint", joint.name, "origin xyz");
      joint.origin_rpy = vec3(*origin, "rpy", Vec3::Zero(), "joint", joint.name, "origin rpy");
    }
    joint.axis = Vec3::UnitX();
    if (auto axis = node.get_child_optional("axis")) {
      joint.axis = vec3(*axis, "xyz", Vec3::UnitX(), "joint", joint.name, "axis");
    }
    if (joint.kind == JointKind::Revolute) {
      if (joint.axis.norm() < 1e-12) fail("zero joint axis", "joint", joint.name);
      joint.axis.normalize();
    }
    joint.parent = node.get<std::string>("parent.<xmlattr>.link", "");
    joint.child = node.get<std::string>("child.<xmlattr>.link", "");
    if (joint.parent.empty() || joint.child.empty()) {
      fail("joint needs parent and child links", "joint", joint.name);
    }
    return joint;
  }

 private:
  std::string_view text_;
};

bool frozen_by_name(const std::string& name) {
  return name.find("ankle") != std::string::npos || name.find("wrist") != std::string::npos ||
         name.find("yaw") != std::string::npos;
}

std::vector<std::string> string_list(const json& meta, const char* key) {
  std::vector<std::string> out;
  if (!meta.contains(key)) return out;
  if (!meta[key].is_array()) throw ModelParseError(std::string(key) + " must be an array", "meta", 0);
  for (const auto& v : meta[key]) {
    if (!v.is_string()) throw ModelParseError(std::string(key) + " must hold strings", "meta", 0);
    out.push_back(v.get<std::string>());
  }
  return out;
}

void apply_meta(ModelDescription& d, std::string_view meta_text, const ParseOptions& options) {
  json meta = json::object();
  if (!meta_text.empty()) {
    try {
      meta = json::parse(meta_text);
    } catch (const json::parse_error& e) {
      throw ModelParseError(std::string("malformed annotation JSON: ") + e.what(), "meta", 0);
    }
    if (!meta.is_object()) throw ModelParseError("annotation JSON must be an object", "meta", 0);
  }

  const auto frozen = string_list(meta, "frozen_joints");
  const auto significant = string_list(meta, "significant_joints");
  const std::set<std::string> frozen_set(frozen.begin(), frozen.end());
  const std::set<std::string> significant_set(significant.begin(), significant.end());
  std::set<std::string> joint_names;
  for (const auto& j : d.joints) joint_names.insert(j.name);
  for (const auto* list : {&frozen, &significant}) {
    for (const auto& name : *list) {
      if (!joint_names.count(name)) {
        throw ModelParseError("annotation names unknown joint '" + name + "'", "meta", 0);
      }
      if (frozen_set.count(name) && significant_set.count(name)) {
        throw ModelParseError("joint '" + name + "' is both frozen and significant", "meta", 0);
      }
    }
  }
  for (auto& j : d.joints) {
    if (frozen_set.count(j.name)) {
      j.significance = Significance::Frozen;
    } else if (significant_set.count(j.name)) {
      j.significance = Significance::Significant;
    } else {
      j.significance = options.frozen_by_name_pattern && frozen_by_name(j.name)
                           ? Significance::Frozen
                           : Significance::Significant;
    }
  }

  try {
    if (meta.contains("frames")) {
      for (const auto& f : meta.at("frames")) {
        FrameSpec frame;
        frame.name = f.at("name").get<std::string>();
        frame.link = f.at("link").get<std::string>();
        if (f.contains("offset")) {
          const auto v = f.at("offset").get<std::vector<double>>();
          if (v.size() != 3) throw ModelParseError("frame offset needs 3 values", "meta", 0);
          frame.offset = Vec3(v[0], v[1], v[2]);
        }
        d.frames.push_back(frame);
      }
    }
    if (meta.contains("limbs")) {
      const json& limbs = meta.at("limbs");
      if (limbs.is_array()) {
        for (const auto& l : limbs) d.limbs.push_back({l.at("name").get<std::string>(), l.at("root_joint").get<std::string>()});
      } else {
        // Object form; keys come back sorted.
        for (const auto& [name, root] : limbs.items()) d.limbs.push_back({name, root.get<std::string>()});
      }
    }
    d.left_foot = meta.value("left_foot", std::string{});
    d.right_foot = meta.value("right_foot", std::string{});
  } catch (const json::exception& e) {
    throw ModelParseError(std::string("malformed annotation: ") + e.what(), "meta", 0);
  }

  // Foot roles may name a link directly.
  for (const std::string* foot : {&d.left_foot, &d.right_foot}) {
    if (foot->empty()) continue;
    const bool known = std::any_of(d.frames.begin(), d.frames.end(),
                                   [&](const FrameSpec& f) { return f.name == *foot; });
    if (!known) d.frames.push_back({*foot, *foot, Vec3::Zero()});
  }

  // Default limb groups: one per subtree hanging off the root that carries a
  // revolute joint.
  if (d.limbs.empty()) {
    std::set<std::string> children;
    for (const auto& j : d.joints) children.insert(j.child);
    std::string root;
    for (const auto& l : d.links) {
      if (!children.count(l.name)) root = l.name;
    }
    std::map<std::string, std::vector<const JointSpec*>> by_parent;
    for (const auto& j : d.joints) by_parent[j.parent].push_back(&j);
    for (const JointSpec* top : by_parent[root]) {
      bool has_revolute = false;
      std::vector<const JointSpec*> stack{top};
      std::set<std::string> seen;
      while (!stack.empty() && !has_revolute) {
        const JointSpec* j = stack.back();
        stack.pop_back();
        if (!seen.insert(j->child).second) break;
        has_revolute = j->kind == JointKind::Revolute;
        for (const JointSpec* c : by_parent[j->child]) stack.push_back(c);
      }
      if (has_revolute) d.limbs.push_back({top->child, top->name});
    }
  }
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string fmt(const Vec3& v) { return fmt(v.x()) + " " + fmt(v.y()) + " " + fmt(v.z()); }

}  // namespace

RobotModel parse_model(std::string_view urdf, std::string_view meta_json,
                       const ParseOptions& options) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(urdf)};
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    throw ModelParseError("malformed XML: " + e.message(), "xml", static_cast<int>(e.line()));
  }

  auto robot = tree.get_child_optional("robot");
  if (!robot) throw ModelParseError("missing <robot> root element", "robot", 0);

  const UrdfReader reader(urdf);
  ModelDescription d;
  d.name = robot->get<std::string>("<xmlattr>.name", "robot");
  for (const auto& [tag, node] : *robot) {
    if (tag == "link") {
      d.links.push_back(reader.read_link(node));
    } else if (tag == "joint") {
      d.joints.push_back(reader.read_joint(node));
    }
    // Visual, collision, transmission, gazebo and other elements carry no dynamics.
  }
  if (d.links.empty()) throw ModelParseError("robot has no links", "robot", 0);

  apply_meta(d, meta_json, options);
  try {
    return RobotModel(std::move(d));
  } catch (const ModelParseError&) {
    throw;
  } catch (const InputError& e) {
    throw ModelParseError(e.what(), "robot", 0);
  }
}

RobotModel load_model_file(const std::string& path, const ParseOptions& options) {
  const auto read = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw InputError("cannot open model file " + p.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  };
  const std::filesystem::path urdf_path(path);
  std::filesystem::path meta_path = urdf_path;
  meta_path.replace_extension(".meta.json");
  const std::string meta = std::filesystem::exists(meta_path) ? read(meta_path) : std::string{};
  return parse_model(read(urdf_path), meta, options);
}

ModelFiles serialize_model(const RobotModel& model) {
  const ModelDescription& d = model.description();
  std::ostringstream x;
  x << "<?xml version=\"1.0\"?>\n<robot name=\"" << d.name << "\">\n";
  for (const auto& l : d.links) {
    const Mat3& I = l.inertia.inertia_about_com;
    x << "  <link name=\"" << l.name << "\">\n"
      << "    <inertial>\n"
      << "      <origin xyz=\"" << fmt(l.inertia.com_offset) << "\" rpy=\"0 0 0\"/>\n"
      << "      <mass value=\"" << fmt(l.inertia.mass) << "\"/>\n"
      << "      <inertia ixx=\"" << fmt(I(0, 0)) << "\" ixy=\"" << fmt(I(0, 1)) << "\" ixz=\""
      << fmt(I(0, 2)) << "\" iyy=\"" << fmt(I(1, 1)) << "\" iyz=\"" << fmt(I(1, 2))
      << "\" izz=\"" << fmt(I(2, 2)) << "\"/>\n"
      << "    </inertial>\n"
      << "  </link>\n";
  }
  for (const auto& j : d.joints) {
    x << "  <joint name=\"" << j.name << "\" type=\""
      << (j.kind == JointKind::Revolute ? "revolute" : "fixed") << "\">\n"
      << "    <origin xyz=\"" << fmt(j.origin_xyz) << "\" rpy=\"" << fmt(j.origin_rpy) << "\"/>\n"
      << "    <parent link=\"" << j.parent << "\"/>\n"
      << "    <child link=\"" << j.child << "\"/>\n";
    if (j.kind == JointKind::Revolute) x << "    <axis xyz=\"" << fmt(j.axis) << "\"/>\n";
    x << "  </joint>\n";
  }
  x << "</robot>\n";

  json meta;
  meta["frozen_joints"] = json::array();
  meta["significant_joints"] = json::array();
  for (const auto& j : d.joints) {
    if (j.kind != JointKind::Revolute) continue;
    meta[j.significance == Significance::Frozen ? "frozen_joints" : "significant_joints"].push_back(j.name);
  }
  meta["left_foot"] = d.left_foot;
  meta["right_foot"] = d.right_foot;
  meta["frames"] = json::array();
  for (const auto& f : d.frames) {
    meta["frames"].push_back({{"name", f.name}, {"link", f.link},
                              {"offset", {f.offset.x(), f.offset.y(), f.offset.z()}}});
  }
  meta["limbs"] = json::array();
  for (const auto& l : d.limbs) meta["limbs"].push_back({{"name", l.name}, {"root_joint", l.root_joint}});
  return {x.str(), meta.dump(2) + "\n"};
}

RobotModelPtr resolve_model(const std::string& spec) {
  constexpr std::string_view prefix = "builtin:";
  if (spec.rfind(prefix, 0) == 0) {
    return std::make_shared<const RobotModel>(builtin_model(spec.substr(prefix.size())));
  }
  const auto names = builtin_model_names();
  if (std::find(names.begin(), names.end(), spec) != names.end()) {
    return std::make_shared<const RobotModel>(builtin_model(spec));
  }
  return std::make_shared<const RobotModel>(load_model_file(spec));
}

}  // namespace flightopt
