#pragma once

// Robot description loading. Supports the dynamics-relevant subset of URDF
// (links with inertial blocks, revolute/continuous/fixed joints) plus a JSON
// side file carrying joint significance, end-effector roles and limb groups:
//
//   {
//     "frozen_joints": ["left_ankle_pitch", ...],
//     "significant_joints": ["left_knee", ...],
//     "left_foot": "left_foot",
//     "right_foot": "right_foot",
//     "frames": [{"name": "left_foot", "link": "left_foot_link", "offset": [0, 0, -0.05]}],
//     "limbs": [{"name": "left_leg", "root_joint": "left_hip_yaw"}, ...]
//   }

#include "flightopt/rbd.hpp"

#include <string>
#include <string_view>

namespace flightopt {

/// Parse failure with the offending element and, when known, its line.
class ModelParseError : public InputError {
 public:
  ModelParseError(std::string message, std::string element, int line);

  const std::string& element() const { return element_; }
  int line() const { return line_; }  // 1-based, 0 when unknown

 private:
  std::string element_;
  int line_;
};

struct ParseOptions {
  // Without annotations, joints whose names contain "ankle", "wrist" or "yaw"
  // are frozen. Disable to make every unlisted joint significant.
  bool frozen_by_name_pattern = true;
};

RobotModel parse_model(std::string_view urdf, std::string_view meta_json = {},
                       const ParseOptions& options = {});

/// Loads `path` and, if present, the sibling `<path stem>.meta.json`.
RobotModel load_model_file(const std::string& path, const ParseOptions& options = {});

struct ModelFiles {
  std::string urdf;
  std::string meta_json;
};

/// Writes a description that parse_model reads back to the same model.
ModelFiles serialize_model(const RobotModel& model);

inline constexpr int kBuiltinModelVersion = 1;

/// Built-in models: "planar3", "biped12", "humanoid20". Throws InputError.
RobotModel builtin_model(std::string_view identifier);
std::vector<std::string> builtin_model_names();

/// Accepts "builtin:<id>", a bare built-in id, or a URDF path.
RobotModelPtr resolve_model(const std::string& spec);

}  // namespace flightopt
