#pragma once

// Command-line front end. The commands live here so tests can drive them
// without spawning processes.

#include "flightopt/io.hpp"
#include "flightopt/rbd.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace flightopt::cli {

enum ExitCode : int { kOk = 0, kValidation = 2, kInfeasible = 3, kNumerical = 4 };

enum class Command { CheckModel, Optimize, Playback, Bench, ExportModel };

struct RunManifest {
  Command command = Command::CheckModel;
  std::string config_path;
  std::string model;  // builtin id or URDF path; overrides the config's model
  std::string out_dir;
  unsigned long seed = 1;
};

/// Property 1/2 and momentum-oracle suites over random states.
struct PropertySuite {
  int configurations = 0;
  double max_A_v = 0.0;                 // max |A_v entry|
  double max_identity_residual = 0.0;   // relative Frobenius error of A_omega
  double min_singular_value = 0.0;      // smallest over all samples
  double max_momentum_error = 0.0;      // relative, A_G nu vs per-body sums
  double max_route_difference = 0.0;    // relative, composite vs mass-matrix CMM
  double seconds = 0.0;
  bool passed = true;
  std::string failure;                  // first failing check, empty on success
  Quat failing_orientation = Quat::Identity();
  VecX failing_q;
  VecX failing_nu;
};

struct SuiteTolerances {
  double A_v = 1e-9;
  double identity = 1e-9;
  double momentum = 1e-8;
};

/// Random unit quaternion, joint angles in [-pi, pi], velocities in [-2, 2].
PropertySuite run_property_suite(const RobotModel& model, int configurations, unsigned long seed,
                                 const SuiteTolerances& tolerances = {});
std::string suite_to_json(const PropertySuite& suite, const RobotModel& model, unsigned long seed);

struct BenchStats {
  int repeats = 0;
  double median = 0.0;  // seconds
  double p95 = 0.0;
  double min = 0.0;
  double max = 0.0;
  int outer_iterations = 0;
  double cost_star = 0.0;
  std::vector<double> samples;
};

/// Solves the same problem `repeats` times and reports solver wall time.
BenchStats bench(const RunConfig& config, int repeats);

/// CPU model, core count, compiler and build type.
std::string machine_info();

/// Entry point; args excludes the program name. Returns an ExitCode.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace flightopt::cli
