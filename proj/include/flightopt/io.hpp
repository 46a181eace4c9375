#pragma once

// Run configuration and result files.
//
// Config JSON:
//   {"model": "builtin:biped12" | "path/to/robot.urdf",
//    "t_f": 0.31, "theta0_quat": [w, x, y, z], "omega0": [..], "v_com_liftoff": [..],
//    "p_stance_td_target": [..], "p_swing_lo_target": [..],
//    "h_stance": 0.05, "h_swing": 0.05, "N": 11, "degree": 3,
//    "stance_foot": "left", "q_hold": {"joint": rad, ...},
//    "literal_constraint_3": false, "normalized_time": true, "n_verify": 1001,
//    "solver": {"gradient_step": 1e-6, ...}}
// Unknown keys are rejected.

#include "flightopt/flight_opt.hpp"

#include <iosfwd>
#include <optional>
#include <string>

namespace flightopt {

struct RunConfig {
  std::string model_spec;
  FlightProblem problem;
  nlp::SolverOptions solver;
  int n_verify = 1001;
};

/// Relative model paths resolve against `base_dir`. Throws InputError.
RunConfig parse_config(const std::string& json_text, const std::string& base_dir = ".",
                       const std::optional<std::string>& model_override = std::nullopt);
/// Accepts a config file or a result.json written by write_result_json.
RunConfig load_config(const std::string& path,
                      const std::optional<std::string>& model_override = std::nullopt);
/// Config JSON reproducing `config`; numbers round-trip exactly.
std::string config_to_json(const RunConfig& config);

/// {"degree", "t_f", "joint_names", "gamma": rows of [t^m ... 1]}
std::string gamma_to_json(const TrajectoryMatrix& traj, const RobotModel& model);
/// Rows are matched to the model by joint name. Throws InputError.
TrajectoryMatrix gamma_from_json(const std::string& json_text, const RobotModel& model);

std::string result_to_json(const FlightSolution& solution, const RunConfig& config, unsigned long seed);

void write_report(std::ostream& out, const RunConfig& config, const PlaybackReport& report,
                  const nlp::SolveResult* solve);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace flightopt
